"""Band-variance function, the Phi_p criterion and design optimisation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blue import InformationMatrix, info_matrix, spd_inverse
from .discrete import Design, estimator_cov
from .kernel import GroupCovariance, TriangularKernel, to_brownian
from .model import CompositeModel, ModelError, difference_contrast
from .quadrature import _reference_rule

__all__ = [
    "CriterionConfig",
    "PsoConfig",
    "DesignProblem",
    "OptimizationResult",
    "h_function",
    "phi_p",
    "uniform_design",
    "optimize_design",
    "pso_minimize",
    "golden_section_max",
]

GAP_FRACTION = 1e-6
GOLDEN_TOL = 1e-8
_QUAD_NODES = 4


@dataclass(frozen=True)
class CriterionConfig:
    p_norm: float = math.inf
    grid_size: int = 2000
    refine: bool = True

    def __post_init__(self):
        if not (self.p_norm >= 1):
            raise ModelError(f"p_norm must be in [1, inf], got {self.p_norm}")
        if int(self.grid_size) != self.grid_size or self.grid_size < 200:
            raise ModelError(f"grid_size must be an integer >= 200, got {self.grid_size}")


@dataclass(frozen=True)
class PsoConfig:
    swarm: int = 40
    iters: int = 300
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    seed: int = 20200101
    restarts: int = 5

    def __post_init__(self):
        if self.swarm < 2:
            raise ModelError(f"swarm must be >= 2, got {self.swarm}")
        if self.iters < 1:
            raise ModelError(f"iters must be >= 1, got {self.iters}")
        if self.restarts < 1:
            raise ModelError(f"restarts must be >= 1, got {self.restarts}")


def golden_section_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Maximise a unimodal scalar function on ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
    best = max((f(lo), lo), (f(hi), hi), (f1, x1), (f2, x2))
    return best[1], best[0]


class DesignProblem:
    """Precomputed pieces of the design criterion for one model and ``Sigma``.

    With a non-Brownian ``kernel`` the estimator lives in the transformed
    (Brownian) time scale while ``h`` is still evaluated for the curves in
    original time; design points are always given in original time.
    """

    def __init__(self, model: CompositeModel, gc: GroupCovariance, cfg: CriterionConfig | None = None,
                 kernel: TriangularKernel | None = None):
        self.model = model
        self.gc = gc
        self.cfg = cfg or CriterionConfig()
        if kernel is None or kernel.name == "brownian":
            self.kernel = None
            self.estimation_model = model
        else:
            self.kernel = kernel
            self.estimation_model, self.time_map = to_brownian(model, kernel)
        self.info: InformationMatrix = info_matrix(self.estimation_model, gc)
        self.Minv = spd_inverse(self.info.M, "information matrix")
        self.Sigma_inv = gc.inverse
        a, b = model.interval
        self.grid = np.linspace(a, b, int(self.cfg.grid_size))
        self.contrast = difference_contrast(model, self.grid)  # (G, p)
        if math.isfinite(self.cfg.p_norm):
            x, w = _reference_rule(_QUAD_NODES)
            half = 0.5 * np.diff(self.grid)
            mid = 0.5 * (self.grid[1:] + self.grid[:-1])
            self.quad_t = (mid[:, None] + half[:, None] * x).ravel()
            self.quad_w = (half[:, None] * w).ravel()
            self.quad_contrast = difference_contrast(model, self.quad_t)

    # -- estimator covariance for many designs at once --------------------

    def _to_estimation_time(self, t):
        return t if self.kernel is None else self.time_map.forward(t)

    def covariances(self, points: np.ndarray) -> np.ndarray:
        """Estimator covariances for designs ``points`` of shape ``(S, n)``."""
        pts = np.asarray(points, dtype=float)
        S, n = pts.shape
        t = self._to_estimation_time(pts)
        F = self.estimation_model.F(t.ravel()).reshape(S, n, self.model.p, 2)
        dF = np.diff(F, axis=1)
        dt = np.diff(t, axis=1)
        B = np.einsum("sipj,jk,siqk,si->spq", dF, self.Sigma_inv, dF, 1.0 / dt)
        B = 0.5 * (B + np.swapaxes(B, 1, 2))
        Binv = np.linalg.pinv(B, rcond=1e-12, hermitian=True)
        M0 = self.info.M0
        inner = M0 @ Binv @ M0 + self.info.boundary
        cov = self.Minv @ inner @ self.Minv
        return 0.5 * (cov + np.swapaxes(cov, 1, 2))

    def h_values(self, cov: np.ndarray, contrast: np.ndarray | None = None) -> np.ndarray:
        C = self.contrast if contrast is None else contrast
        return np.einsum("gp,...pq,gq->...g", C, cov, C)

    def h(self, design, t):
        cov = self.covariances(np.atleast_2d(_points(design)))[0]
        c = difference_contrast(self.model, t)
        return np.einsum("...p,pq,...q->...", c, cov, c)

    def criteria(self, points: np.ndarray, refine: bool | None = None) -> np.ndarray:
        """Criterion values for designs ``points`` of shape ``(S, n)``."""
        pts = np.asarray(points, dtype=float)
        covs = self.covariances(pts)
        p = self.cfg.p_norm
        if math.isfinite(p):
            h = self.h_values(covs, self.quad_contrast)
            return (np.abs(h) ** p @ self.quad_w) ** (1.0 / p)
        h = self.h_values(covs)
        values = np.max(np.abs(h), axis=-1)
        refine = self.cfg.refine if refine is None else refine
        if refine:
            values = np.array([self._refine_sup(cov, hs, v) for cov, hs, v in zip(covs, h, values)])
        return values

    def _refine_sup(self, cov, h, grid_max):
        k = int(np.argmax(np.abs(h)))
        lo = self.grid[max(k - 1, 0)]
        hi = self.grid[min(k + 1, len(self.grid) - 1)]

        def hval(t):
            c = difference_contrast(self.model, t)
            return abs(float(c @ cov @ c))

        _, best = golden_section_max(hval, lo, hi)
        return max(best, grid_max)

    def criterion(self, design, refine: bool | None = None) -> float:
        return float(self.criteria(np.atleast_2d(_points(design)), refine)[0])

    # -- particle handling -------------------------------------------------

    def full_designs(self, interior: np.ndarray) -> np.ndarray:
        a, b = self.model.interval
        x = np.sort(np.asarray(interior, dtype=float), axis=1)
        S = x.shape[0]
        return np.hstack([np.full((S, 1), a), x, np.full((S, 1), b)])

    def particle_criteria(self, interior: np.ndarray, refine: bool = False) -> np.ndarray:
        """Criterion for unordered interior points; coincident points score ``inf``."""
        pts = self.full_designs(interior)
        a, b = self.model.interval
        bad = np.any(np.diff(pts, axis=1) < GAP_FRACTION * (b - a), axis=1)
        out = np.full(pts.shape[0], np.inf)
        if np.any(~bad):
            with np.errstate(all="ignore"):
                vals = self.criteria(pts[~bad], refine=refine)
            out[~bad] = np.where(np.isfinite(vals), vals, np.inf)
        return out


def _points(design) -> np.ndarray:
    return np.asarray(design.points if isinstance(design, Design) else design, dtype=float)


def h_function(model: CompositeModel, gc: GroupCovariance, design, t, info: InformationMatrix | None = None):
    """Variance of the estimated curve difference at ``t``: ``c(t)^T Cov c(t)``."""
    if not model.contains(t):
        raise ModelError(f"t outside [{model.a}, {model.b}]")
    cov = estimator_cov(model, gc, design, info)
    c = difference_contrast(model, t)
    return np.einsum("...p,pq,...q->...", c, cov, c)


def phi_p(model: CompositeModel, gc: GroupCovariance, design, cfg: CriterionConfig | None = None,
          kernel: TriangularKernel | None = None) -> float:
    """``L_p`` norm of ``h`` over the interval (the supremum for ``p = inf``)."""
    return DesignProblem(model, gc, cfg, kernel).criterion(design)


def uniform_design(a: float, b: float, n: int) -> Design:
    if n < 2:
        raise ModelError(f"n must be >= 2, got {n}")
    return Design(np.linspace(a, b, n))


# ---------------------------------------------------------------------------
# particle swarm
# ---------------------------------------------------------------------------


def pso_minimize(func, lower: float, upper: float, dim: int, cfg: PsoConfig, rng: np.random.Generator):
    """Global-best particle swarm with constriction coefficients.

    ``func`` evaluates a ``(swarm, dim)`` array row-wise.  Coordinates leaving
    ``[lower, upper]`` are reflected back.  Returns the best position, its
    value and the best value after every iteration.
    """
    span = upper - lower
    x = rng.uniform(lower, upper, (cfg.swarm, dim))
    v = 0.5 * (rng.uniform(lower, upper, (cfg.swarm, dim)) - x)
    fx = func(x)
    pbest, pval = x.copy(), fx.copy()
    g = int(np.argmin(pval))
    gbest, gval = pbest[g].copy(), float(pval[g])
    history = np.empty(cfg.iters)
    for it in range(cfg.iters):
        r1 = rng.random((cfg.swarm, dim))
        r2 = rng.random((cfg.swarm, dim))
        v = cfg.inertia * v + cfg.c1 * r1 * (pbest - x) + cfg.c2 * r2 * (gbest - x)
        v = np.clip(v, -span, span)
        x = x + v
        # reflect, then clip in case a particle jumped past both walls
        x = np.where(x < lower, 2 * lower - x, x)
        x = np.where(x > upper, 2 * upper - x, x)
        x = np.clip(x, lower, upper)
        fx = func(x)
        improved = fx < pval
        pbest[improved] = x[improved]
        pval[improved] = fx[improved]
        g = int(np.argmin(pval))
        if pval[g] < gval:
            gbest, gval = pbest[g].copy(), float(pval[g])
        history[it] = gval
    return gbest, gval, history


@dataclass
class OptimizationResult:
    design: Design
    value: float
    search_value: float
    history: list[np.ndarray] = field(default_factory=list, repr=False)
    restart_values: list[float] = field(default_factory=list)

    def __iter__(self):
        yield self.design
        yield self.value


def optimize_design(model: CompositeModel, gc: GroupCovariance, n: int, cfg: CriterionConfig | None = None,
                    pso: PsoConfig | None = None, kernel: TriangularKernel | None = None,
                    problem: DesignProblem | None = None) -> OptimizationResult:
    """Minimise the criterion over the ``n - 2`` interior design points.

    The swarm searches with the grid criterion; the reported value of the
    winning design is re-evaluated with ``cfg`` (including sup refinement).
    """
    pso = pso or PsoConfig()
    problem = problem or DesignProblem(model, gc, cfg, kernel)
    a, b = model.interval
    if n < 2:
        raise ModelError(f"n must be >= 2, got {n}")
    if n == 2:
        design = Design([a, b])
        value = problem.criterion(design)
        return OptimizationResult(design, value, value)
    best_x, best_val = None, np.inf
    histories, values = [], []
    for r in range(pso.restarts):
        rng = np.random.default_rng([pso.seed, r])
        x, val, hist = pso_minimize(problem.particle_criteria, a, b, n - 2, pso, rng)
        histories.append(hist)
        values.append(val)
        if val < best_val:
            best_x, best_val = x, val
    if best_x is None:
        raise ModelError("particle swarm found no admissible design")
    design = Design(problem.full_designs(best_x[None, :])[0])
    return OptimizationResult(design, problem.criterion(design), best_val, histories, values)
