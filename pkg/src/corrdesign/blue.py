"""Continuous-time best linear unbiased estimation.

Covers the information matrix of a fully observed trajectory, the BLUE
covariance, separate per-group estimation and its Loewner comparison with
simultaneous estimation, and the reductions needed when the interval starts
at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, qr

from .kernel import GroupCovariance
from .model import CompositeModel, General, ModelError
from .quadrature import integrate

__all__ = [
    "NumericalError",
    "InformationMatrix",
    "BlueCovariance",
    "ReducedBlue",
    "info_matrix",
    "integral_part",
    "blue_cov",
    "spd_inverse",
    "marginal_cov",
    "loewner_gap",
    "blue_cov_a0",
    "blue_estimate_path",
]

CONDITION_LIMIT = 1e14
QUAD_TOL = 1e-10
RANK_TOL = 1e-10


class NumericalError(ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


@dataclass(frozen=True)
class InformationMatrix:
    M: np.ndarray
    M0: np.ndarray
    boundary: np.ndarray
    quadrature_error: float


@dataclass(frozen=True)
class BlueCovariance:
    cov: np.ndarray


def spd_inverse(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    M = 0.5 * (M + M.T)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NumericalError(f"{what} is numerically singular (condition number {cond:.3g})")
    try:
        factor = cho_factor(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite") from exc
    inv = cho_solve(factor, np.eye(M.shape[0]))
    return 0.5 * (inv + inv.T)


def integral_part(model: CompositeModel, gc: GroupCovariance, a: float | None = None, b: float | None = None,
                  tol: float = QUAD_TOL, panels: int = 64):
    """``int_a^b Fdot Sigma^-1 Fdot^T dt`` and its quadrature error estimate."""
    Si = gc.inverse
    a = model.a if a is None else a
    b = model.b if b is None else b

    def integrand(t):
        D = model.Fdot(t)
        return np.einsum("mpi,ij,mqj->mpq", D, Si, D)

    substitution = model.substitution if (a, b) == model.interval else None
    M0, err = integrate(integrand, a, b, panels=panels, tol=tol, substitution=substitution)
    return 0.5 * (M0 + M0.T), err


def info_matrix(model: CompositeModel, gc: GroupCovariance) -> InformationMatrix:
    """Information matrix ``M = int Fdot Sigma^-1 Fdot^T dt + F(a) Sigma^-1 F(a)^T / a``."""
    a = model.a
    if a <= 0:
        raise ModelError("info_matrix needs a > 0; use blue_cov_a0 for intervals starting at 0")
    M0, err = integral_part(model, gc)
    Fa = model.F(a)
    boundary = Fa @ gc.inverse @ Fa.T / a
    boundary = 0.5 * (boundary + boundary.T)
    return InformationMatrix(M0 + boundary, M0, boundary, err)


def blue_cov(model: CompositeModel, gc: GroupCovariance, info: InformationMatrix | None = None) -> BlueCovariance:
    info = info if info is not None else info_matrix(model, gc)
    return BlueCovariance(spd_inverse(info.M, "information matrix"))


def _group_information(model: CompositeModel, group: int) -> np.ndarray:
    f = model.group_basis(group)

    def integrand(t):
        d = f.deriv(t).T
        return d[:, :, None] * d[:, None, :]

    integral, _ = integrate(integrand, model.a, model.b, tol=QUAD_TOL)
    fa = f.eval(model.a)
    return integral + np.outer(fa, fa) / model.a


def marginal_cov(model: CompositeModel, gc: GroupCovariance, group: int) -> np.ndarray:
    """Covariance of the BLUE computed from group ``group`` alone."""
    if isinstance(model.structure, General):
        raise ModelError("marginal estimation needs a separate or shared model")
    if model.a <= 0:
        raise ModelError("marginal_cov needs a > 0")
    sigma = gc.sigma1 if group == 1 else gc.sigma2
    return sigma**2 * spd_inverse(_group_information(model, group), f"group {group} information")


def loewner_gap(model: CompositeModel, gc: GroupCovariance, group: int,
                cov: BlueCovariance | None = None) -> np.ndarray:
    """Separate-minus-simultaneous covariance for the parameters of one group."""
    marginal = marginal_cov(model, gc, group)
    cov = cov if cov is not None else blue_cov(model, gc)
    idx = model.group_indices(group)
    gap = marginal - cov.cov[np.ix_(idx, idx)]
    return 0.5 * (gap + gap.T)


# ---------------------------------------------------------------------------
# intervals starting at zero
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedBlue:
    """BLUE on ``[0, b]`` after removing parameters fixed by ``Y(0) = F(0)^T theta``.

    ``theta[pivots] = offset(Y(0)) + recovery @ theta[free]`` where
    ``offset(y0) = solve(A0, y0[rows])``; ``cov`` is the covariance of the
    free parameters and ``full_cov`` the induced (singular) covariance of the
    whole vector.
    """

    rank: int
    rows: np.ndarray
    pivots: np.ndarray
    free: np.ndarray
    A0: np.ndarray
    recovery: np.ndarray
    reduced_model: CompositeModel | None
    cov: np.ndarray
    full_cov: np.ndarray

    def recover(self, y0, theta_free) -> np.ndarray:
        y0 = np.asarray(y0, dtype=float)
        theta = np.empty(len(self.pivots) + len(self.free))
        theta[self.free] = theta_free
        if self.rank:
            theta[self.pivots] = np.linalg.solve(self.A0, y0[self.rows]) + self.recovery @ theta_free
        return theta


def _reduce(model: CompositeModel, rows, pivots, free, A0, W_free) -> CompositeModel:
    A0_inv_W = np.linalg.solve(A0, W_free)  # (r, p - r)

    def reduce(G):
        # G: (m, p, 2); returns (m, p - r, 2) for Ft(t) = R(t) - A(t) A0^-1 W_free
        Gt = np.swapaxes(G, 1, 2)  # (m, 2, p)
        out = Gt[:, :, free] - Gt[:, :, pivots] @ A0_inv_W
        return np.swapaxes(out, 1, 2)

    return CompositeModel(
        model.interval,
        len(free),
        General("reduced at t=0"),
        lambda t: reduce(model.F(t)),
        lambda t: reduce(model.Fdot(t)),
    )


def blue_cov_a0(model: CompositeModel, gc: GroupCovariance) -> ReducedBlue:
    """BLUE covariance on ``[0, b]``, where ``Y(0)`` is observed without error.

    Depending on ``rank F(0)`` zero, one or two parameters are determined
    exactly by the initial observation; the rest are estimated from the
    reduced model, whose regression matrix vanishes at zero.
    """
    if model.a != 0:
        raise ModelError("blue_cov_a0 applies to intervals starting at 0")
    p = model.p
    Ft0 = model.F(0.0).T  # (2, p)
    sv = np.linalg.svd(Ft0, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv[0] > 0 else 0

    if rank == 0:
        M0, _ = integral_part(model, gc)
        cov = spd_inverse(M0, "integral information matrix")
        empty = np.array([], dtype=int)
        return ReducedBlue(0, empty, empty, np.arange(p), np.zeros((0, 0)), np.zeros((0, p)), model, cov, cov)

    rows = np.arange(2) if rank == 2 else np.array([int(np.argmax(np.linalg.norm(Ft0, axis=1)))])
    W = Ft0[rows]
    _, _, perm = qr(W, pivoting=True)
    pivots = np.sort(perm[:rank])
    A0 = W[:, pivots]
    if abs(np.linalg.det(A0)) <= RANK_TOL * np.max(np.abs(W)) ** rank:
        raise NumericalError("no nonsingular pivot block found in F(0)")
    free = np.setdiff1d(np.arange(p), pivots)
    recovery = -np.linalg.solve(A0, W[:, free])
    reduced = _reduce(model, rows, pivots, free, A0, W[:, free])
    if free.size == 0:
        return ReducedBlue(rank, rows, pivots, free, A0, recovery, None, np.zeros((0, 0)), np.zeros((p, p)))
    M0, _ = integral_part(reduced, gc)
    cov = spd_inverse(M0, "reduced information matrix")
    L = np.zeros((p, free.size))
    L[free, np.arange(free.size)] = 1.0
    L[pivots] = recovery
    full = L @ cov @ L.T
    return ReducedBlue(rank, rows, pivots, free, A0, recovery, reduced, cov, 0.5 * (full + full.T))


# ---------------------------------------------------------------------------
# estimator from a sampled trajectory
# ---------------------------------------------------------------------------

MIN_PATH_POINTS = 1000


def blue_estimate_path(model: CompositeModel, gc: GroupCovariance, grid, path,
                       info: InformationMatrix | None = None) -> np.ndarray:
    """Left-point discretisation of the BLUE from a finely sampled trajectory.

    ``path`` has shape ``(N, 2)`` or ``(R, N, 2)`` for ``R`` replicates;
    the result has shape ``(p,)`` or ``(R, p)``.
    """
    grid = np.asarray(grid, dtype=float)
    path = np.asarray(path, dtype=float)
    if grid.ndim != 1 or grid.size < MIN_PATH_POINTS:
        raise ModelError(f"trajectory grid needs at least {MIN_PATH_POINTS} points")
    if np.any(np.diff(grid) <= 0):
        raise ModelError("trajectory grid must be strictly increasing")
    if not (np.isclose(grid[0], model.a) and np.isclose(grid[-1], model.b)):
        raise ModelError("trajectory grid must start at a and end at b")
    if path.shape[-2:] != (grid.size, 2):
        raise ModelError(f"path shape {path.shape} does not match grid of {grid.size} points")
    info = info if info is not None else info_matrix(model, gc)
    Si = gc.inverse
    weights = model.Fdot(grid[:-1]) @ Si  # (N-1, p, 2)
    dY = np.diff(path, axis=-2)
    Fa = model.F(model.a) @ Si / model.a
    rhs = np.einsum("kpj,...kj->...p", weights, dY) + path[..., 0, :] @ Fa.T
    Minv = spd_inverse(info.M, "information matrix")
    return rhs @ Minv.T
