"""Classical solutions and residual checks.

The first-order flow  phi' = -a (phi^2 - beta^2)  is solved in closed form by
tanh/coth profiles with frequency a*beta (= b/2).  Differentiating the flow
shows every flow solution also solves the symmetric second-order equation,
but never the broken one: the broken equation differs by the constant a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .action import ActionForm, interacting_action, symmetric_action
from .core import Branch, Lattice, ModelParams, Path, check_path


class ProfileKind(Enum):
    TANH = "tanh"
    COTH = "coth"


class EquationId(Enum):
    """Which pointwise equation a residual is evaluated against."""

    EL_SYMMETRIC = "el_symmetric"  # phi'' - 2 a^2 phi (phi^2 - beta^2)
    EL_BROKEN = "el_broken"        # same + a
    FLOW_PLUS = "flow_plus"        # phi' + a (phi^2 - beta^2)
    FLOW_MINUS = "flow_minus"      # phi' - a (phi^2 - beta^2)
    BOUNDARY_COND = "boundary_cond"  # flow residual at the two endpoints


class SingularityError(RuntimeError):
    """A coth profile was evaluated at (or across) its pole."""

    def __init__(self, t_star: float):
        self.t_star = t_star
        super().__init__(f"coth profile has a pole at t* = {t_star:.12g}")


class ConvergenceError(RuntimeError):
    """The shooting solver found no root in its search bracket."""


@dataclass(frozen=True)
class KinkSolution:
    """Closed-form flow solution fixed by the bound value phi(-T) = -alpha.

    kind is TANH for |alpha| < beta (profile stays inside the wells) and COTH
    for |alpha| > beta (profile beyond the wells, with a pole); |alpha| = beta
    degenerates to the constant solution, represented as TANH with c = +-inf.
    """

    kind: ProfileKind
    c: float
    alpha: float
    params: ModelParams


def make_kink(params: ModelParams, T: float, alpha: float) -> KinkSolution:
    """Classify the bound value and fix the integration constant c."""
    beta = params.beta
    if beta <= 0:
        raise ValueError("closed-form profiles need b > 0 (separated wells)")
    if T <= 0:
        raise ValueError(f"half-interval T must be positive, got {T}")
    w = params.a * beta
    ratio = alpha / beta
    if abs(ratio) < 1.0:
        kind, c = ProfileKind.TANH, w * T - math.atanh(ratio)
    elif abs(ratio) > 1.0:
        kind, c = ProfileKind.COTH, w * T - math.atanh(1.0 / ratio)
    else:
        # degenerate constant solution -alpha = -+beta
        kind, c = ProfileKind.TANH, math.copysign(math.inf, -ratio)
    return KinkSolution(kind=kind, c=c, alpha=float(alpha), params=params)


def odd_kink(params: ModelParams, T: float) -> KinkSolution:
    """The odd (c = 0) tanh kink, phi(t) = beta tanh(a beta t)."""
    beta = params.beta
    if beta <= 0:
        raise ValueError("closed-form profiles need b > 0 (separated wells)")
    alpha = beta * math.tanh(params.a * beta * T)
    return KinkSolution(kind=ProfileKind.TANH, c=0.0, alpha=alpha, params=params)


def kink_profile(solution: KinkSolution, t):
    """Evaluate beta*tanh(a beta t + c) or beta*coth(a beta t + c)."""
    beta = solution.params.beta
    w = solution.params.a * beta
    arg = w * np.asarray(t, dtype=float) + solution.c
    if solution.kind is ProfileKind.COTH:
        scale = max(1.0, abs(solution.c))
        if np.any(np.abs(arg) < 1e-12 * scale):
            raise SingularityError(t_star=-solution.c / w)
        out = beta / np.tanh(arg)
    else:
        out = beta * np.tanh(arg)
    return float(out) if out.ndim == 0 else out


def coth_pole_time(solution: KinkSolution) -> float:
    """Location t* = -c / (a beta) of the coth profile's pole."""
    if solution.kind is not ProfileKind.COTH:
        raise ValueError("only coth profiles have a pole")
    return -solution.c / (solution.params.a * solution.params.beta)


def residual(path: Path, eq: EquationId, lattice: Lattice, params: ModelParams) -> np.ndarray:
    """Pointwise residual of the named equation on the grid.

    Second-order residuals use centered second differences on interior nodes,
    flow residuals centered first differences on interior nodes, and the
    boundary condition one-sided differences at the two ends (a 2-vector).
    """
    phi = check_path(path, lattice)
    if phi.ndim != 1:
        raise ValueError("residual expects a single path")
    a, beta, eps = params.a, params.beta, lattice.epsilon
    inner = phi[1:-1]
    if eq in (EquationId.EL_SYMMETRIC, EquationId.EL_BROKEN):
        acc = (phi[2:] - 2.0 * inner + phi[:-2]) / eps**2
        res = acc - 2.0 * a * a * inner * (inner * inner - beta * beta)
        if eq is EquationId.EL_BROKEN:
            res = res + a
        return res
    if eq in (EquationId.FLOW_PLUS, EquationId.FLOW_MINUS):
        vel = (phi[2:] - phi[:-2]) / (2.0 * eps)
        s = 1.0 if eq is EquationId.FLOW_PLUS else -1.0
        return vel + s * a * (inner * inner - beta * beta)
    left = (phi[1] - phi[0]) / eps + a * (phi[0] ** 2 - beta * beta)
    right = (phi[-1] - phi[-2]) / eps + a * (phi[-1] ** 2 - beta * beta)
    return np.array([left, right])


def _march_broken(s_values: np.ndarray, lattice: Lattice, params: ModelParams):
    """Discrete shooting sweep for the broken stationarity system.

    Marches the centered-difference stencil
        phi_{i+1} = 2 phi_i - phi_{i-1} + eps^2 (2 a^2 phi_i (phi_i^2-beta^2) - a)
    with phi_1 fixed by the one-sided left boundary condition.  Returns the
    marched paths, a finite/bounded mask, and the one-sided right boundary
    residual per starting value.
    """
    a, beta, eps = params.a, params.beta, lattice.epsilon
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    phi = np.empty((s.size, lattice.N + 1))
    phi[:, 0] = s
    phi[:, 1] = s - eps * a * (s * s - beta * beta)
    ok = np.ones(s.size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, lattice.N):
            cur = phi[:, i]
            force = 2.0 * a * a * cur * (cur * cur - beta * beta) - a
            phi[:, i + 1] = 2.0 * cur - phi[:, i - 1] + eps * eps * force
            ok &= np.isfinite(phi[:, i + 1]) & (np.abs(phi[:, i + 1]) < 1e8)
        g = (phi[:, -1] - phi[:, -2]) / eps + a * (phi[:, -1] ** 2 - beta * beta)
    g[~ok] = np.nan
    return phi, ok, g


def solve_broken_bvp(lattice: Lattice, params: ModelParams, initial_guess: Path) -> Path:
    """Shoot the broken-symmetry stationarity system on the grid.

    The single shooting unknown is the left value phi(-T); the left slope is
    eliminated by the left boundary condition and the right boundary residual
    is driven to zero by bracketing plus Brent root refinement.  Among
    multiple roots the one nearest initial_guess[0] is returned.  The result
    satisfies the discrete interior equation and both one-sided boundary
    conditions to well below 1e-6.
    """
    from scipy.optimize import brentq

    guess = check_path(initial_guess, lattice)
    s0 = float(guess[0])
    beta = params.beta
    half_width = max(2.0, 3.0 * beta) + abs(s0)
    scan = np.linspace(-half_width, half_width, 2401)
    _, ok, g = _march_broken(scan, lattice, params)

    def g_scalar(s: float) -> float:
        return float(_march_broken(np.array([s]), lattice, params)[2][0])

    roots = []
    for i in range(scan.size - 1):
        if ok[i] and ok[i + 1] and np.isfinite(g[i]) and np.isfinite(g[i + 1]):
            if g[i] == 0.0:
                roots.append(scan[i])
            elif g[i] * g[i + 1] < 0.0:
                roots.append(brentq(g_scalar, scan[i], scan[i + 1], xtol=1e-14))
    if not roots:
        finite = np.isfinite(g)
        span = (
            f"[{scan[finite].min():.3g}, {scan[finite].max():.3g}]"
            if finite.any()
            else "empty"
        )
        min_abs = float(np.nanmin(np.abs(g))) if finite.any() else math.nan
        raise ConvergenceError(
            "no bracketed root of the right boundary residual in "
            f"phi(-T) in [{-half_width:.3g}, {half_width:.3g}] "
            f"(finite shooting window {span}, min |residual| {min_abs:.3g})"
        )
    best = min(roots, key=lambda r: abs(r - s0))
    path = _march_broken(np.array([best]), lattice, params)[0][0]
    return path


def boundary_action_gap(
    path: Path,
    lattice: Lattice,
    params: ModelParams,
    branch: Branch = Branch.PLUS,
) -> float:
    """Broken action (boundary form) minus symmetric action on a path.

    For an odd path on a symmetric grid this reduces to
        a phi_T eps + 2 a phi_T^3 / 3 - 2 a beta^2 phi_T,
    the a*phi_T*eps piece being the left-sum remainder of the odd linear
    term; it vanishes as the grid refines, leaving 2 a phi_T (phi_T^2/3 - beta^2).
    """
    phi = check_path(path, lattice)
    broken = interacting_action(phi, branch, ActionForm.BOUNDARY_FORM, lattice, params)
    return broken - symmetric_action(phi, lattice, params)


def odd_gap_prediction(params: ModelParams, phi_end: float) -> float:
    """Continuum prediction 2 a phi(T) (phi(T)^2/3 - beta^2) for odd paths."""
    return 2.0 * params.a * phi_end * (phi_end**2 / 3.0 - params.beta**2)


def action_gap(solution: KinkSolution, lattice: Lattice, params: ModelParams) -> float:
    """Evaluate the broken-minus-symmetric gap on the odd (c = 0) tanh kink.

    The gap is computed, not assumed: for the odd kink it converges to
    2 a phi(T) (phi(T)^2/3 - beta^2), which is nonzero at finite T.
    """
    if solution.kind is not ProfileKind.TANH or solution.c != 0.0:
        raise ValueError("action_gap requires the odd tanh profile (c = 0)")
    phi = kink_profile(solution, lattice.times)
    return boundary_action_gap(phi, lattice, params, Branch.PLUS)
