"""Shared domain types: model parameters, time lattice, paths, branches.

Everything here is an immutable value type; instances can be shared freely
between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# A grid path is a plain float array of N+1 node values, path[i] at times[i].
Path = np.ndarray


class Branch(Enum):
    """Sign branch of the nonlocal substitution and of the broken action."""

    PLUS = "plus"
    MINUS = "minus"

    @property
    def sign(self) -> float:
        return 1.0 if self is Branch.PLUS else -1.0


@dataclass(frozen=True)
class ModelParams:
    """Double-well couplings a, b and the quantum scale hbar.

    The wells sit at +-beta with beta = b/(2a).  b = 0 is allowed and
    collapses both minima onto the origin (plain quartic self-interaction).
    """

    a: float
    b: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"coupling a must be positive, got {self.a}")
        if self.b < 0:
            raise ValueError(f"coupling b must be non-negative, got {self.b}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")

    @property
    def beta(self) -> float:
        return self.b / (2.0 * self.a)


@dataclass(frozen=True, eq=False)
class Lattice:
    """Uniform grid of N steps (N+1 nodes) covering [-T, +T]."""

    T: float
    N: int
    epsilon: float
    times: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.N + 1


def make_params(a: float, b: float, hbar: float = 1.0) -> ModelParams:
    return ModelParams(a=float(a), b=float(b), hbar=float(hbar))


def make_lattice(T: float, N: int) -> Lattice:
    if T <= 0:
        raise ValueError(f"half-interval T must be positive, got {T}")
    N = int(N)
    if N < 2:
        raise ValueError(f"step count N must be at least 2, got {N}")
    times = np.linspace(-T, T, N + 1)
    times.flags.writeable = False
    return Lattice(T=float(T), N=N, epsilon=2.0 * float(T) / N, times=times)


def check_path(path: Path, lattice: Lattice) -> np.ndarray:
    """Validate that a path (or batch of paths) matches the lattice."""
    arr = np.asarray(path, dtype=float)
    if arr.shape[-1] != lattice.N + 1:
        raise ValueError(
            f"path has {arr.shape[-1]} nodes, lattice expects {lattice.N + 1}"
        )
    return arr


@dataclass(frozen=True)
class BlowupReport:
    """Where a path exceeded a magnitude threshold or went non-finite.

    max_abs is taken over the finite entries only (0.0 if there are none).
    """

    flagged_indices: tuple[int, ...]
    max_abs: float
    all_finite: bool
