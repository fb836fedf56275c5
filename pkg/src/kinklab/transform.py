"""The nonlocal substitution as an exactly invertible triangular lattice map.

chi_i = phi_i + s a sum_{j<i} (phi_j^2 - beta^2) eps  (s = +1 PLUS, -1 MINUS)

In the node increments this map is unit lower triangular, so its Jacobian is
exactly 1 and pushing Gaussian increments through the inverse samples the
interacting measure with no reweighting.  The inverse recursion can run away
(the lattice trace of the singular function sector); blowups are reported,
never clamped.
"""

from __future__ import annotations

import numpy as np

from .core import BlowupReport, Branch, Lattice, ModelParams, Path, check_path

DEFAULT_BLOWUP_THRESHOLD = 1e6


class BlowupError(RuntimeError):
    """Inverse recursion left the representable range."""

    def __init__(self, report: BlowupReport, branch: Branch):
        self.report = report
        self.branch = branch
        first = report.flagged_indices[0] if report.flagged_indices else -1
        super().__init__(
            f"inverse map blew up on branch {branch.value} "
            f"(first flagged node {first}, max finite |phi| {report.max_abs:.3g})"
        )


def scan_singularities(phi: Path, threshold: float = DEFAULT_BLOWUP_THRESHOLD) -> BlowupReport:
    """Flag nodes where |phi| exceeds `threshold` or is non-finite."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    arr = np.asarray(phi, dtype=float)
    finite = np.isfinite(arr)
    flagged = ~finite | (np.abs(arr) > threshold)
    max_abs = float(np.max(np.abs(arr[finite]))) if finite.any() else 0.0
    return BlowupReport(
        flagged_indices=tuple(int(i) for i in np.nonzero(flagged)[0]),
        max_abs=max_abs,
        all_finite=bool(finite.all()),
    )


def forward_map(phi: Path, branch: Branch, lattice: Lattice, params: ModelParams) -> Path:
    """phi -> chi.  chi_0 = phi_0; left-point cumulative drift added above."""
    phi = check_path(phi, lattice)
    a, beta, eps = params.a, params.beta, lattice.epsilon
    drift = branch.sign * a * (phi[:-1] ** 2 - beta * beta) * eps
    chi = np.empty_like(phi)
    chi[0] = phi[0]
    chi[1:] = phi[1:] + np.cumsum(drift)
    return chi


def inverse_map(chi: Path, branch: Branch, lattice: Lattice, params: ModelParams) -> Path:
    """chi -> phi by the explicit recursion

    phi_{i+1} = phi_i + (chi_{i+1} - chi_i) - s a (phi_i^2 - beta^2) eps.

    Exact inverse of `forward_map` up to roundoff.  A non-finite intermediate
    raises BlowupError carrying the report; values are never repaired.
    """
    chi = check_path(chi, lattice)
    a, beta, eps, s = params.a, params.beta, lattice.epsilon, branch.sign
    dchi = np.diff(chi)
    phi = np.full_like(chi, np.nan)
    phi[0] = chi[0]
    x = chi[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(lattice.N):
            x = x + dchi[i] - s * a * (x * x - beta * beta) * eps
            if not np.isfinite(x):
                raise BlowupError(scan_singularities(phi, np.inf), branch)
            phi[i + 1] = x
    return phi


def inverse_map_batch(
    chi: np.ndarray,
    branch: Branch,
    lattice: Lattice,
    params: ModelParams,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse over rows of `chi` (sampler plumbing).

    Returns (phi, ok) where ok[r] is False if row r went non-finite or beyond
    `threshold` in magnitude anywhere.  Bad rows are left as computed (with
    NaN/inf tails); callers discard them.
    """
    chi = check_path(chi, lattice)
    if chi.ndim != 2:
        raise ValueError("inverse_map_batch expects a 2-D batch of paths")
    a, beta, eps, s = params.a, params.beta, lattice.epsilon, branch.sign
    phi = np.empty_like(chi)
    phi[:, 0] = chi[:, 0]
    ok = np.ones(chi.shape[0], dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(lattice.N):
            x = phi[:, i]
            nxt = x + (chi[:, i + 1] - chi[:, i]) - s * a * (x * x - beta * beta) * eps
            phi[:, i + 1] = nxt
            ok &= np.isfinite(nxt) & (np.abs(nxt) <= threshold)
    return phi, ok


def numeric_jacobian_det(
    phi: Path,
    branch: Branch,
    lattice: Lattice,
    params: ModelParams,
    step: float = 1e-6,
) -> float:
    """Finite-difference determinant of d(chi)/d(phi); must be 1 to ~1e-6.

    Small lattices only: the matrix assembly is O(N^2) full-size columns.
    """
    if lattice.N > 16:
        raise ValueError(f"jacobian assembly limited to N <= 16, got N={lattice.N}")
    phi = check_path(phi, lattice)
    n = lattice.N + 1
    jac = np.empty((n, n))
    for j in range(n):
        bumped = phi.copy()
        bumped[j] = phi[j] + step
        hi = forward_map(bumped, branch, lattice, params)
        bumped[j] = phi[j] - step
        lo = forward_map(bumped, branch, lattice, params)
        jac[:, j] = (hi - lo) / (2.0 * step)
    return float(np.linalg.det(jac))
