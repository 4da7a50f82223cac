"""Correlated Brownian observations, critical values and confidence bands.

Random numbers come from per-block streams keyed by ``(seed, tag, block)``
so results do not depend on how blocks are spread over threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .blue import InformationMatrix, info_matrix
from .discrete import Design, estimate, estimator_cov, optimal_weights
from .kernel import GroupCovariance, sigma_sqrt
from .model import CompositeModel, ModelError, difference_contrast

__all__ = [
    "PathSample",
    "BandResult",
    "block_rng",
    "sample_paths",
    "sample_observations",
    "critical_value",
    "sup_statistic_draws",
    "confidence_band",
    "simultaneous_coverage",
    "average_bands",
]

BLOCK = 1024
DEFAULT_SEED = 20200101

# stream tags keep unrelated simulations from sharing random numbers
_OBS, _CRIT = 1, 2


def block_rng(seed: int, tag: int, block: int) -> np.random.Generator:
    if int(seed) < 0:
        raise ModelError(f"seed must be nonnegative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(tag), int(block))))


def _blocks(total: int, size: int = BLOCK):
    return [(k, k * size, min(size, total - k * size)) for k in range((total + size - 1) // size)]


def _map_blocks(fn, blocks, threads: int):
    if threads == 1 or len(blocks) == 1:
        return [fn(*blk) for blk in blocks]
    workers = None if threads in (0, None) else threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda blk: fn(*blk), blocks))


@dataclass(frozen=True)
class PathSample:
    design: Design
    y: np.ndarray  # (n, 2)
    seed: int


@dataclass(frozen=True)
class BandResult:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    h: np.ndarray
    D: float
    alpha: float
    estimate: np.ndarray

    def __post_init__(self):
        if not np.all(self.upper >= self.lower):
            raise ModelError("band upper envelope below lower envelope")

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def sample_paths(model: CompositeModel, gc: GroupCovariance, theta, points, n_rep: int, seed: int,
                 threads: int = 1, block: int = BLOCK, start_block: int = 0) -> np.ndarray:
    """``Y(t_j) = F(t_j)^T theta + Sigma^{1/2} eps(t_j)`` for ``n_rep`` replicates.

    ``eps`` are two independent Brownian motions started at zero, so the
    first point may be ``0``.  Returns shape ``(n_rep, n, 2)``.  Large runs
    can be drawn in chunks by advancing ``start_block`` between calls.
    """
    t = np.asarray(points, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ModelError("sample points must be nonnegative and strictly increasing")
    if n_rep < 1:
        raise ModelError("n_rep must be positive")
    mean = model.F(t).transpose(0, 2, 1) @ np.asarray(theta, dtype=float)  # (n, 2)
    steps = np.sqrt(np.diff(np.concatenate([[0.0], t])))
    root = sigma_sqrt(gc)

    def run(k, start, size):
        rng = block_rng(seed, _OBS, start_block + k)
        eps = np.cumsum(rng.standard_normal((size, t.size, 2)) * steps[None, :, None], axis=1)
        return mean + eps @ root.T

    return np.concatenate(_map_blocks(run, _blocks(n_rep, block), threads), axis=0)


def sample_observations(model: CompositeModel, gc: GroupCovariance, theta, design, seed: int) -> PathSample:
    design = design if isinstance(design, Design) else Design(design)
    y = sample_paths(model, gc, theta, design.array, 1, seed)[0]
    return PathSample(design, y, seed)


def _band_pieces(model, cov, grid):
    grid = np.asarray(grid, dtype=float).ravel()
    c = difference_contrast(model, grid)
    h = np.einsum("gp,pq,gq->g", c, cov, c)
    bad = np.flatnonzero(h <= 1e-14 * max(1.0, float(np.max(np.abs(h)))))
    if bad.size:
        raise ModelError(f"h(t) vanishes at t={float(grid[bad[0]])!r}; the contrast is degenerate there")
    return grid, c, h


def _cov_root(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.clip(w, 0.0, None))


def sup_statistic_draws(model, cov, grid, mc_draws: int, seed: int, threads: int = 1) -> np.ndarray:
    """Draws of ``sup_t |c(t)^T Z| / sqrt(h(t))`` with ``Z ~ N(0, cov)``."""
    grid, c, h = _band_pieces(model, cov, grid)
    W = (c @ _cov_root(cov)) / np.sqrt(h)[:, None]  # (G, p)

    def run(k, start, size):
        z = block_rng(seed, _CRIT, k).standard_normal((size, W.shape[1]))
        return np.max(np.abs(z @ W.T), axis=1)

    return np.concatenate(_map_blocks(run, _blocks(mc_draws, 8192), threads))


def critical_value(model: CompositeModel, gc: GroupCovariance, design, alpha: float, grid,
                   mc_draws: int = 100_000, seed: int = DEFAULT_SEED, threads: int = 1,
                   info: InformationMatrix | None = None, cov: np.ndarray | None = None) -> float:
    """Parametric ``(1 - alpha)`` quantile of the sup statistic over ``grid``."""
    if not 0 < alpha < 1:
        raise ModelError(f"alpha must be in (0, 1), got {alpha}")
    if mc_draws < 1000:
        raise ModelError("mc_draws must be at least 1000")
    cov = cov if cov is not None else estimator_cov(model, gc, design, info)
    draws = sup_statistic_draws(model, cov, grid, mc_draws, seed, threads)
    return float(np.quantile(draws, 1.0 - alpha))


def confidence_band(model: CompositeModel, gc: GroupCovariance, design, observations, alpha: float, grid,
                    D: float | None = None, mc_draws: int = 100_000, seed: int = DEFAULT_SEED,
                    info: InformationMatrix | None = None, cov: np.ndarray | None = None,
                    weights=None) -> BandResult:
    """Simultaneous band ``c(t)^T theta_hat -/+ D sqrt(h(t))`` for the curve difference."""
    design = design if isinstance(design, Design) else Design(design)
    info = info if info is not None else info_matrix(model, gc)
    cov = cov if cov is not None else estimator_cov(model, gc, design, info)
    weights = weights if weights is not None else optimal_weights(model, gc, design, info)
    theta_hat = estimate(model, gc, design, weights, observations, info)
    grid, c, h = _band_pieces(model, cov, grid)
    if D is None:
        D = critical_value(model, gc, design, alpha, grid, mc_draws, seed, cov=cov)
    center = c @ theta_hat
    half = D * np.sqrt(h)
    return BandResult(grid, center - half, center + half, h, float(D), float(alpha), center)


def simultaneous_coverage(model: CompositeModel, gc: GroupCovariance, theta, design, alpha: float, grid,
                          n_rep: int, seed: int = DEFAULT_SEED, mc_draws: int = 100_000,
                          threads: int = 1) -> tuple[float, float]:
    """Fraction of replicates whose band contains the true difference on ``grid``.

    Returns ``(coverage, D)``.
    """
    design = design if isinstance(design, Design) else Design(design)
    info = info_matrix(model, gc)
    cov = estimator_cov(model, gc, design, info)
    weights = optimal_weights(model, gc, design, info)
    grid, c, h = _band_pieces(model, cov, grid)
    D = critical_value(model, gc, design, alpha, grid, mc_draws, seed, threads, cov=cov)
    y = sample_paths(model, gc, theta, design.array, n_rep, seed, threads)
    theta_hat = estimate(model, gc, design, weights, y, info)
    dev = np.abs((theta_hat - np.asarray(theta, dtype=float)) @ c.T) / np.sqrt(h)
    return float(np.mean(np.max(dev, axis=1) <= D)), D


def average_bands(model: CompositeModel, gc: GroupCovariance, theta, design, alpha: float, grid,
                  runs: int = 100, seed: int = DEFAULT_SEED, mc_draws: int = 100_000,
                  threads: int = 1) -> BandResult:
    """Envelopes averaged over ``runs`` simulated data sets; ``D`` is computed once."""
    design = design if isinstance(design, Design) else Design(design)
    info = info_matrix(model, gc)
    cov = estimator_cov(model, gc, design, info)
    weights = optimal_weights(model, gc, design, info)
    grid, c, h = _band_pieces(model, cov, grid)
    D = critical_value(model, gc, design, alpha, grid, mc_draws, seed, threads, cov=cov)
    y = sample_paths(model, gc, theta, design.array, runs, seed, threads)
    center = (estimate(model, gc, design, weights, y, info) @ c.T).mean(axis=0)
    half = D * np.sqrt(h)
    return BandResult(grid, center - half, center + half, h, D, float(alpha), center)
