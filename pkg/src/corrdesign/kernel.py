"""Between-group covariance and within-group (triangular) kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .model import CompositeModel, General, ModelError, Term, TimeSubstitution, parse_term

__all__ = [
    "GroupCovariance",
    "sigma_sqrt",
    "cross_correlation",
    "brownian_gram",
    "TriangularKernel",
    "TimeMap",
    "to_brownian",
    "kernel_from_spec",
]


@dataclass(frozen=True)
class GroupCovariance:
    """The 2x2 between-group matrix ``[[s1^2, s1 s2 rho], [s1 s2 rho, s2^2]]``."""

    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ModelError(f"sigma1 and sigma2 must be positive, got {self.sigma1}, {self.sigma2}")
        if not -1.0 < self.rho < 1.0:
            raise ModelError(f"rho must lie in (-1, 1), got {self.rho}")

    @property
    def matrix(self) -> np.ndarray:
        s1, s2, r = self.sigma1, self.sigma2, self.rho
        return np.array([[s1 * s1, s1 * s2 * r], [s1 * s2 * r, s2 * s2]])

    @property
    def inverse(self) -> np.ndarray:
        s1, s2, r = self.sigma1, self.sigma2, self.rho
        det = (s1 * s2) ** 2 * (1.0 - r * r)
        return np.array([[s2 * s2, -s1 * s2 * r], [-s1 * s2 * r, s1 * s1]]) / det

    @property
    def sqrt(self) -> np.ndarray:
        return sigma_sqrt(self)

    @property
    def inv_sqrt(self) -> np.ndarray:
        w, V = np.linalg.eigh(self.matrix)
        return (V / np.sqrt(w)) @ V.T


def sigma_sqrt(gc: GroupCovariance) -> np.ndarray:
    """Symmetric positive-definite square root of the group covariance."""
    if not -1.0 < gc.rho < 1.0:
        raise ModelError(f"rho must lie in (-1, 1), got {gc.rho}")
    w, V = np.linalg.eigh(gc.matrix)
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def cross_correlation(gc: GroupCovariance, tj: float, tk: float) -> float:
    """Correlation of ``Y_1(tj)`` and ``Y_2(tk)`` under Brownian errors."""
    if tj <= 0 or tk <= 0:
        raise ModelError(f"times must be positive, got {tj}, {tk}")
    return gc.rho * np.sqrt(min(tj, tk) / max(tj, tk))


def brownian_gram(points) -> np.ndarray:
    """Matrix of ``min(t_j, t_k)`` for strictly increasing nonnegative points."""
    t = np.asarray(points, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ModelError("points must be a nonempty vector")
    if np.any(np.diff(t) <= 0):
        raise ModelError("points must be strictly increasing")
    if t[0] < 0:
        raise ModelError("points must be nonnegative")
    return np.minimum.outer(t, t)


@dataclass(frozen=True)
class TriangularKernel:
    """Markov kernel ``K(s, t) = v(s) v(t) min(q(s), q(t))`` with ``q = u / v``.

    Equivalently ``K(s, t) = u(min(s, t)) v(max(s, t))``.  ``qinv`` is
    optional; without it the inverse is found by root bracketing.
    """

    u: Term
    v: Term
    name: str = "triangular"
    qinv_func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def q(self, t):
        t = np.asarray(t, dtype=float)
        return self.u.func(t) / self.v.func(t)

    def qdot(self, t):
        t = np.asarray(t, dtype=float)
        u, v, du, dv = self.u.func(t), self.v.func(t), self.u.deriv(t), self.v.deriv(t)
        return (du * v - u * dv) / (v * v)

    def qinv(self, x, interval: tuple[float, float]):
        x = np.asarray(x, dtype=float)
        if self.qinv_func is not None:
            return self.qinv_func(x)
        a, b = interval
        qa, qb = float(self.q(a)), float(self.q(b))

        def one(val):
            if val <= qa:
                return a
            if val >= qb:
                return b
            return brentq(lambda s: float(self.q(s)) - val, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)

        return np.vectorize(one, otypes=[float])(x)

    def K(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return self.v.func(s) * self.v.func(t) * np.minimum(self.q(s), self.q(t))

    def validate(self, interval: tuple[float, float]) -> None:
        grid = np.linspace(*interval, 500)
        with np.errstate(all="ignore"):
            v = self.v.func(grid)
            q = self.q(grid)
        if not np.all(np.isfinite(v)) or np.any(v == 0) or np.any(np.sign(v) != np.sign(v[0])):
            raise ModelError(f"kernel {self.name!r}: v vanishes or is undefined on the interval")
        if not np.all(np.isfinite(q)) or np.any(q <= 0) or np.any(np.diff(q) <= 0):
            raise ModelError(f"kernel {self.name!r}: q = u/v must be positive and strictly increasing")

    @classmethod
    def brownian(cls) -> "TriangularKernel":
        return cls(parse_term("t"), parse_term("1"), "brownian", lambda x: np.asarray(x, dtype=float))

    @classmethod
    def scaled_brownian(cls, c: float) -> "TriangularKernel":
        if c <= 0:
            raise ModelError(f"scale must be positive, got {c}")
        return cls(parse_term(f"{c!r}*t"), parse_term("1"), "scaled_brownian", lambda x: np.asarray(x) / c)

    @classmethod
    def ornstein_uhlenbeck(cls, lam: float = 1.0) -> "TriangularKernel":
        """``K(s, t) = exp(-lam |t - s|)``."""
        if lam <= 0:
            raise ModelError(f"rate must be positive, got {lam}")
        return cls(
            parse_term(f"exp({lam!r}*t)"),
            parse_term(f"exp({-lam!r}*t)"),
            "ornstein_uhlenbeck",
            lambda x: np.log(np.asarray(x, dtype=float)) / (2.0 * lam),
        )


@dataclass(frozen=True)
class TimeMap:
    """Maps the original model to its Brownian-motion equivalent.

    ``t~ = q(t)`` and ``Y~(t~) = Y(t) / v(t)``.
    """

    kernel: TriangularKernel
    interval: tuple[float, float]

    def forward(self, t):
        return self.kernel.q(t)

    def inverse(self, x):
        return self.kernel.qinv(x, self.interval)

    def transform_observations(self, t, y):
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.forward(t), y / self.kernel.v.func(t)[..., None]


def to_brownian(model: CompositeModel, kernel: TriangularKernel) -> tuple[CompositeModel, TimeMap]:
    """Rewrite a model with triangular-kernel errors as one with Brownian errors.

    The transformed matrix is ``F~(x) = F(q^-1(x)) / v(q^-1(x))`` on
    ``[q(a), q(b)]``; the parameter vector is unchanged.
    """
    kernel.validate(model.interval)
    tmap = TimeMap(kernel, model.interval)
    a, b = model.interval
    new_interval = (float(kernel.q(a)), float(kernel.q(b)))
    u, v = kernel.u, kernel.v

    def F_new(x):
        t = tmap.inverse(x)
        return model.F(t) / v.func(t)[:, None, None]

    def Fdot_new(x):
        t = tmap.inverse(x)
        vt, dv = v.func(t), v.deriv(t)
        denom = u.deriv(t) * vt - u.func(t) * dv
        num = model.Fdot(t) * vt[:, None, None] - model.F(t) * dv[:, None, None]
        return num / denom[:, None, None]

    substitution = TimeSubstitution(model.interval, kernel.q, kernel.qdot)
    transformed = CompositeModel(
        new_interval, model.p, General(f"{kernel.name} transform"), F_new, Fdot_new, substitution
    )
    return transformed, tmap


def kernel_from_spec(spec) -> TriangularKernel:
    """Kernel from a config entry: ``"brownian"``, ``{"ornstein_uhlenbeck": lam}``,
    ``{"scaled_brownian": c}`` or ``{"triangular": {"u": ..., "v": ...}}``."""
    if spec is None or spec == "brownian":
        return TriangularKernel.brownian()
    if spec == "ornstein_uhlenbeck":
        return TriangularKernel.ornstein_uhlenbeck()
    if isinstance(spec, dict) and len(spec) == 1:
        (key, val), = spec.items()
        if key == "ornstein_uhlenbeck":
            return TriangularKernel.ornstein_uhlenbeck(float(val))
        if key == "scaled_brownian":
            return TriangularKernel.scaled_brownian(float(val))
        if key == "triangular" and isinstance(val, dict) and set(val) == {"u", "v"}:
            return TriangularKernel(parse_term(val["u"]), parse_term(val["v"]))
    raise ModelError(f"unknown kernel specification {spec!r}")
