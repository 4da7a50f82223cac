"""Linear estimators built from observations at finitely many design points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blue import InformationMatrix, info_matrix, integral_part, spd_inverse
from .kernel import GroupCovariance
from .model import CompositeModel, ModelError

__all__ = [
    "Design",
    "WeightMatrices",
    "DiscreteEstimatorSpec",
    "increments",
    "b_matrices",
    "optimal_weights",
    "unbiasedness_residual",
    "unbiasedness_matrix",
    "estimator_cov",
    "weights_cov",
    "mse_vs_blue",
    "estimate",
    "random_unbiased_weights",
    "discrete_estimator",
]

PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class Design:
    """Strictly increasing observation times ``a = t_1 < ... < t_n = b``."""

    points: tuple[float, ...]

    def __init__(self, points):
        pts = tuple(float(x) for x in np.asarray(points, dtype=float).ravel())
        if len(pts) < 2:
            raise ModelError("a design needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ModelError(f"design points must be strictly increasing, got {pts}")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    def check(self, model: CompositeModel, tol: float = 1e-9) -> None:
        span = model.b - model.a
        if abs(self.points[0] - model.a) > tol * span or abs(self.points[-1] - model.b) > tol * span:
            raise ModelError(f"design must start at a={model.a} and end at b={model.b}, got {self.points}")


@dataclass(frozen=True)
class WeightMatrices:
    """Weights ``Phi_2, ..., Phi_n`` stacked as an ``(n - 1, p, 2)`` array."""

    phis: np.ndarray
    pseudoinverse: bool = False


@dataclass(frozen=True)
class DiscreteEstimatorSpec:
    design: Design
    weights: WeightMatrices
    info: InformationMatrix
    cov: np.ndarray


def _as_design(design) -> Design:
    return design if isinstance(design, Design) else Design(design)


def increments(model: CompositeModel, design) -> tuple[np.ndarray, np.ndarray]:
    """``F(t_i) - F(t_{i-1})`` as ``(n - 1, p, 2)`` and the spacings ``t_i - t_{i-1}``."""
    t = _as_design(design).array
    F = model.F(t)
    return np.diff(F, axis=0), np.diff(t)


def b_matrices(model: CompositeModel, gc: GroupCovariance, design):
    """``B_i = dF_i Sigma^{-1/2} / sqrt(dt_i)`` and ``B = sum_i B_i B_i^T``."""
    design = _as_design(design)
    if model.a <= 0:
        raise ModelError("b_matrices needs a > 0")
    dF, dt = increments(model, design)
    Bi = dF @ gc.inv_sqrt / np.sqrt(dt)[:, None, None]
    B = np.einsum("ipj,iqj->pq", Bi, Bi)
    return Bi, 0.5 * (B + B.T)


def _b_inverse(B: np.ndarray) -> tuple[np.ndarray, bool]:
    s = np.linalg.svd(B, compute_uv=False)
    if s[0] == 0 or s[-1] <= PINV_CUTOFF * s[0]:
        return np.linalg.pinv(B, rcond=PINV_CUTOFF, hermitian=True), True
    return spd_inverse(B, "increment matrix B"), False


def optimal_weights(model: CompositeModel, gc: GroupCovariance, design,
                    info: InformationMatrix | None = None) -> WeightMatrices:
    """Loewner-optimal unbiased weights ``Phi_i = M0 B^+ dF_i / dt_i``.

    The pseudoinverse replaces ``B^-1`` when ``B`` is singular; the result
    is flagged in that case.
    """
    design = _as_design(design)
    design.check(model)
    info = info if info is not None else info_matrix(model, gc)
    _, B = b_matrices(model, gc, design)
    Binv, pinv = _b_inverse(B)
    dF, dt = increments(model, design)
    phis = np.einsum("pq,qr,irj->ipj", info.M0, Binv, dF) / dt[:, None, None]
    return WeightMatrices(phis, pinv)


def unbiasedness_matrix(model, gc, design, weights, info=None) -> np.ndarray:
    """``M0 - sum_i Phi_i Sigma^-1 dF_i^T``; zero iff the estimator is unbiased."""
    info = info if info is not None else info_matrix(model, gc)
    dF, _ = increments(model, design)
    phis = np.asarray(getattr(weights, "phis", weights))
    if phis.shape != dF.shape:
        raise ModelError(f"weights shape {phis.shape} does not match {dF.shape}")
    return info.M0 - np.einsum("ipj,jk,iqk->pq", phis, gc.inverse, dF)


def unbiasedness_residual(model, gc, design, weights, info=None) -> float:
    return float(np.linalg.norm(unbiasedness_matrix(model, gc, design, weights, info)))


def estimator_cov(model: CompositeModel, gc: GroupCovariance, design,
                  info: InformationMatrix | None = None) -> np.ndarray:
    """Covariance of the optimally weighted estimator,
    ``M^-1 (M0 B^+ M0 + F(a) Sigma^-1 F(a)^T / a) M^-1``."""
    design = _as_design(design)
    design.check(model)
    info = info if info is not None else info_matrix(model, gc)
    _, B = b_matrices(model, gc, design)
    Binv, _ = _b_inverse(B)
    Minv = spd_inverse(info.M, "information matrix")
    inner = info.M0 @ Binv @ info.M0 + info.boundary
    cov = Minv @ inner @ Minv
    return 0.5 * (cov + cov.T)


def weights_cov(model, gc, design, weights, info=None) -> np.ndarray:
    """Covariance of the discrete estimator for arbitrary weights."""
    info = info if info is not None else info_matrix(model, gc)
    _, dt = increments(model, design)
    phis = np.asarray(getattr(weights, "phis", weights))
    inner = np.einsum("ipj,jk,iqk,i->pq", phis, gc.inverse, phis, dt) + info.boundary
    Minv = spd_inverse(info.M, "information matrix")
    cov = Minv @ inner @ Minv
    return 0.5 * (cov + cov.T)


def mse_vs_blue(model: CompositeModel, gc: GroupCovariance, design, weights, theta,
                info: InformationMatrix | None = None) -> np.ndarray:
    """``E[(theta_BLUE - theta_n)(theta_BLUE - theta_n)^T]`` including the bias term."""
    design = _as_design(design)
    info = info if info is not None else info_matrix(model, gc)
    Si = gc.inverse
    dF, dt = increments(model, design)
    phis = np.asarray(getattr(weights, "phis", weights))
    t = design.array
    # per-interval int Fdot Sigma^-1 Fdot^T; the pieces sum to M0 only if the design spans [a, b]
    local = sum(integral_part(model, gc, t0, t1, panels=8)[0] for t0, t1 in zip(t[:-1], t[1:]))
    cross = np.einsum("ipj,jk,iqk->pq", dF, Si, phis)
    first = local - cross - cross.T + np.einsum("ipj,jk,iqk,i->pq", phis, Si, phis, dt)
    R = unbiasedness_matrix(model, gc, design, phis, info)
    theta = np.asarray(theta, dtype=float)
    bias = R @ theta
    Minv = spd_inverse(info.M, "information matrix")
    out = Minv @ (first + np.outer(bias, bias)) @ Minv
    return 0.5 * (out + out.T)


def estimate(model: CompositeModel, gc: GroupCovariance, design, weights, observations,
             info: InformationMatrix | None = None) -> np.ndarray:
    """Apply the discrete linear estimator.

    ``observations`` holds ``Y(t_j)`` as ``(n, 2)`` or ``(R, n, 2)``.
    """
    design = _as_design(design)
    y = np.asarray(observations, dtype=float)
    if y.shape[-2:] != (design.n, 2):
        raise ModelError(f"observations shape {y.shape} does not match {design.n} design points")
    info = info if info is not None else info_matrix(model, gc)
    Si = gc.inverse
    phis = np.asarray(getattr(weights, "phis", weights))
    dY = np.diff(y, axis=-2)
    Fa = model.F(model.a) @ Si / model.a
    rhs = np.einsum("ipj,jk,...ik->...p", phis, Si, dY) + y[..., 0, :] @ Fa.T
    Minv = spd_inverse(info.M, "information matrix")
    return rhs @ Minv.T


def random_unbiased_weights(model, gc, design, rng, scale=1.0, info=None) -> np.ndarray:
    """Random weights projected onto the affine set of unbiased weights.

    A Gaussian perturbation of the optimal weights is corrected by the
    minimum-norm solution of the unbiasedness constraint.  When ``2(n-1) == p``
    the constraint has a unique solution and the optimum is returned.
    """
    info = info if info is not None else info_matrix(model, gc)
    opt = optimal_weights(model, gc, design, info).phis
    dF, _ = increments(model, design)
    m, p, _ = dF.shape
    G = np.einsum("jk,iqk->ijq", gc.inverse, dF).reshape(2 * m, p)  # stacked Sigma^-1 dF_i^T
    X = np.transpose(opt, (1, 0, 2)).reshape(p, 2 * m)
    X = X + scale * np.max(np.abs(X)) * rng.standard_normal(X.shape)
    X = X + (info.M0 - X @ G) @ np.linalg.pinv(G)
    return np.transpose(X.reshape(p, m, 2), (1, 0, 2))


def discrete_estimator(model, gc, design, info=None) -> DiscreteEstimatorSpec:
    design = _as_design(design)
    info = info if info is not None else info_matrix(model, gc)
    weights = optimal_weights(model, gc, design, info)
    return DiscreteEstimatorSpec(design, weights, info, estimator_cov(model, gc, design, info))
