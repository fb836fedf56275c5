"""Two independent samplers of the interacting path measure.

(A) Mapped sampling: draw free Gaussian-increment paths chi and push them
    through the inverse substitution.  Because the lattice map has unit
    Jacobian, retained draws are exact samples of exp(-S_exact/hbar)
    restricted to the window max|phi| <= blowup_threshold.
(B) Metropolis: single-site random-walk sampling of exp(-S_exact/hbar) on
    the same window (proposals beyond it are rejected), so both samplers
    target the identical distribution and must agree within Monte Carlo
    error at any hbar.  Divergence indicates a bug, not discretization.

Both are reproducible bit-for-bit from (seed, config); chunk/group sub-streams
are spawned from the seed so thread count never changes the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import Branch, Lattice, ModelParams
from .transform import DEFAULT_BLOWUP_THRESHOLD, inverse_map_batch

_MAPPED_CHUNK = 16384
_WALKER_GROUP = 64


class BlowupBudgetError(RuntimeError):
    """Mapped sampling rejected more draws than the configured budget."""


class TuningError(RuntimeError):
    """Proposal-width bisection failed to reach the target acceptance."""


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs shared by both samplers.

    The initial node is pinned at x0 (the free-increment measure needs a
    fixed starting point); the final node is free.  blowup_budget is the
    tolerated fraction of mapped draws lost to the singular sector before
    sampling aborts: exceeding it signals parameters where the window
    conditioning is no longer a small correction.
    """

    n_samples: int = 100_000
    n_burnin: int = 1000
    n_thin: int = 4
    proposal_width: float = 0.5
    seed: int = 42
    x0: float = 0.0
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD
    blowup_budget: float = 0.01
    n_walkers: int = 64

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.n_burnin < 0:
            raise ValueError(f"n_burnin must be >= 0, got {self.n_burnin}")
        if self.n_thin < 1:
            raise ValueError(f"n_thin must be >= 1, got {self.n_thin}")
        if not self.proposal_width > 0:
            raise ValueError(f"proposal_width must be positive, got {self.proposal_width}")
        if not self.blowup_threshold > 0:
            raise ValueError(f"blowup_threshold must be positive, got {self.blowup_threshold}")
        if self.blowup_budget < 0:
            raise ValueError(f"blowup_budget must be >= 0, got {self.blowup_budget}")
        if self.n_walkers < 1:
            raise ValueError(f"n_walkers must be >= 1, got {self.n_walkers}")
        if abs(self.x0) > self.blowup_threshold:
            raise ValueError("x0 lies outside the blowup window")


@dataclass(frozen=True)
class SampleBatch:
    """Finite paths plus bookkeeping.  acceptance_rate is NaN for mapped
    batches (there is no accept/reject chain); Metropolis batches are stored
    walker-major so blocked error estimates see whole chains contiguously."""

    paths: np.ndarray
    n_rejected_blowups: int
    acceptance_rate: float
    seed_used: int


def _stream(seed: int, *key: int) -> np.random.Generator:
    root = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(key))
    return np.random.default_rng(root)


def sample_wiener_batch(
    lattice: Lattice,
    params: ModelParams,
    config: SamplerConfig,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """n free paths: chi[:,0] = x0, independent N(0, hbar*eps) increments."""
    sigma = math.sqrt(params.hbar * lattice.epsilon)
    chi = np.empty((n, lattice.N + 1))
    chi[:, 0] = config.x0
    chi[:, 1:] = config.x0 + np.cumsum(rng.normal(0.0, sigma, (n, lattice.N)), axis=1)
    return chi


def sample_wiener_path(
    lattice: Lattice,
    params: ModelParams,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One free-increment path (the right-hand-side measure of the map)."""
    if rng is None:
        rng = _stream(config.seed, 0, 0)
    return sample_wiener_batch(lattice, params, config, 1, rng)[0]


def sample_mapped_batch(
    lattice: Lattice,
    params: ModelParams,
    branch: Branch,
    config: SamplerConfig,
    threads: int = 1,
) -> SampleBatch:
    """Exact sampling of the interacting measure through the inverse map.

    Draws whose inverse goes non-finite or beyond the window are counted and
    redrawn; going over budget raises BlowupBudgetError.  Work is split into
    fixed-size chunks with per-chunk spawned generators, so results are
    identical for any `threads`.
    """
    n = config.n_samples
    budget = config.blowup_budget * n
    kept: list[np.ndarray] = []
    n_kept = 0
    n_rejected = 0
    next_chunk = 0

    def draw_chunk(job: tuple[int, int]) -> tuple[np.ndarray, int]:
        index, size = job
        rng = _stream(config.seed, 0, index)
        chi = sample_wiener_batch(lattice, params, config, size, rng)
        phi, ok = inverse_map_batch(chi, branch, lattice, params, config.blowup_threshold)
        return phi[ok], int(size - ok.sum())

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while n_kept < n:
            shortfall = n - n_kept
            jobs = []
            while shortfall > 0:
                size = min(shortfall, _MAPPED_CHUNK)
                jobs.append((next_chunk, size))
                next_chunk += 1
                shortfall -= size
            results = pool.map(draw_chunk, jobs) if pool else map(draw_chunk, jobs)
            for good, bad in results:
                kept.append(good)
                n_kept += good.shape[0]
                n_rejected += bad
            if n_rejected > budget:
                raise BlowupBudgetError(
                    f"{n_rejected} of {n_kept + n_rejected} draws blew up "
                    f"(budget {config.blowup_budget:.1%} of {n}); parameters are "
                    "outside the safe regime for this window"
                )
    finally:
        if pool:
            pool.shutdown()
    paths = np.concatenate(kept, axis=0)[:n]
    return SampleBatch(
        paths=paths,
        n_rejected_blowups=n_rejected,
        acceptance_rate=math.nan,
        seed_used=config.seed,
    )


def _metropolis_group(
    lattice: Lattice,
    params: ModelParams,
    branch: Branch,
    config: SamplerConfig,
    group: int,
    walkers: int,
    keep: int,
) -> tuple[np.ndarray, int, int]:
    """Advance one vectorized walker group; returns (harvests, accepted, proposed)."""
    rng = _stream(config.seed, 1, group)
    n_nodes = lattice.N + 1
    a, beta, eps = params.a, params.beta, lattice.epsilon
    s, hbar, thr, width = branch.sign, params.hbar, config.blowup_threshold, config.proposal_width

    phi = np.full((walkers, n_nodes), config.x0)
    out = np.empty((keep, walkers, n_nodes))
    harvested = 0
    accepted = 0
    proposed = 0
    n_sweeps = config.n_burnin + (keep - 1) * config.n_thin + 1
    for sweep in range(n_sweeps):
        noise = rng.normal(0.0, width, (walkers, lattice.N))
        uniform = rng.random((walkers, lattice.N))
        for i in range(1, n_nodes):
            cur = phi[:, i]
            prop = cur + noise[:, i - 1]
            prev = phi[:, i - 1]
            base = prev - s * a * (prev * prev - beta * beta) * eps
            old = (cur - base) ** 2
            new = (prop - base) ** 2
            if i < lattice.N:
                nxt = phi[:, i + 1]
                old = old + (nxt - cur + s * a * (cur * cur - beta * beta) * eps) ** 2
                new = new + (nxt - prop + s * a * (prop * prop - beta * beta) * eps) ** 2
            d_action = (new - old) / (2.0 * eps)
            ratio = np.exp(np.clip(-d_action / hbar, -745.0, 0.0))
            take = (uniform[:, i - 1] < ratio) & (np.abs(prop) <= thr)
            phi[take, i] = prop[take]
            if sweep >= config.n_burnin:
                accepted += int(take.sum())
                proposed += walkers
        if sweep >= config.n_burnin and (sweep - config.n_burnin) % config.n_thin == 0:
            out[harvested] = phi
            harvested += 1
    return out, accepted, proposed


def run_metropolis(
    lattice: Lattice,
    params: ModelParams,
    branch: Branch,
    config: SamplerConfig,
    threads: int = 1,
) -> SampleBatch:
    """Single-site random-walk Metropolis on the exact lattice action.

    Node 0 is pinned at x0 and never updated; node N is free.  The proposal
    is symmetric additive Gaussian, so acceptance is min(1, exp(-dS/hbar)),
    with proposals outside the window rejected to match the mapped sampler's
    target.  Walkers start from the constant x0 path; acceptance_rate is
    measured over post-burn-in sweeps.
    """
    total_walkers = config.n_walkers
    keep = -(-config.n_samples // total_walkers)
    groups = []
    w = 0
    while w < total_walkers:
        groups.append(min(_WALKER_GROUP, total_walkers - w))
        w += groups[-1]

    def run_group(item: tuple[int, int]) -> tuple[np.ndarray, int, int]:
        index, size = item
        return _metropolis_group(lattice, params, branch, config, index, size, keep)

    jobs = list(enumerate(groups))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_group, jobs))
    else:
        results = [run_group(j) for j in jobs]

    blocks = []
    accepted = 0
    proposed = 0
    for out, acc, tot in results:
        # (keep, walkers, nodes) -> walker-major (walkers*keep, nodes)
        blocks.append(np.swapaxes(out, 0, 1).reshape(-1, lattice.N + 1))
        accepted += acc
        proposed += tot
    paths = np.concatenate(blocks, axis=0)[: config.n_samples]
    return SampleBatch(
        paths=paths,
        n_rejected_blowups=0,
        acceptance_rate=accepted / proposed if proposed else math.nan,
        seed_used=config.seed,
    )


def tune_proposal(
    lattice: Lattice,
    params: ModelParams,
    branch: Branch,
    config: SamplerConfig,
    target: tuple[float, float] = (0.3, 0.6),
    max_iter: int = 30,
) -> float:
    """Bisect the proposal width until pilot acceptance lands in `target`.

    Acceptance is monotone decreasing in the width, so a geometric bracket
    plus bisection converges in a handful of pilot runs.
    """
    lo, hi = None, None  # lo: too-narrow width (acc high), hi: too-wide
    width = config.proposal_width
    for iteration in range(max_iter):
        pilot = replace(
            config,
            n_samples=32 * 40,
            n_burnin=50,
            n_thin=1,
            n_walkers=32,
            proposal_width=width,
            seed=config.seed + iteration,
        )
        acc = run_metropolis(lattice, params, branch, pilot).acceptance_rate
        if target[0] <= acc <= target[1]:
            return width
        if acc > target[1]:
            lo = width
            width = width * 2.0 if hi is None else math.sqrt(lo * hi)
        else:
            hi = width
            width = width / 2.0 if lo is None else math.sqrt(lo * hi)
    raise TuningError(
        f"no width with acceptance in [{target[0]}, {target[1]}] after {max_iter} pilots"
    )
