"""Regression bases and the composite two-group model.

A :class:`CurveBasis` is a vector of scalar regression functions taken from a
small closed-form catalog (powers, sin/cos with a frequency, log, exp,
constants).  A :class:`CompositeModel` stacks two bases into the (p x 2)
matrix function ``F(t)`` whose first column drives group 1 and whose second
column drives group 2.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "ModelError",
    "Term",
    "parse_term",
    "CurveBasis",
    "Separate",
    "Shared",
    "General",
    "TimeSubstitution",
    "CompositeModel",
    "build_separate",
    "build_shared",
    "build_general",
    "difference_contrast",
    "F_A",
    "F_B",
    "F_C",
    "BUILTIN_BASES",
    "basis_from_spec",
]

GRAM_CONDITION_LIMIT = 1e12


class ModelError(ValueError):
    """Invalid basis or model specification."""


# ---------------------------------------------------------------------------
# scalar terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """A scalar regression function with its analytic derivative."""

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))


_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_COEF = rf"(?P<c>[+-]?(?:{_NUM})?)\*?"


def _coef(text: str | None) -> float:
    if text in (None, "", "+"):
        return 1.0
    if text == "-":
        return -1.0
    return float(text)


def _const(c: float) -> Term:
    return Term(
        repr(c) if c != int(c) else str(int(c)),
        lambda t: np.full_like(t, c, dtype=float),
        lambda t: np.zeros_like(t, dtype=float),
    )


def _power(k: float, name: str) -> Term:
    if k == 0:
        return _const(1.0)
    if k == 1:
        return Term(name, lambda t: np.array(t, dtype=float), lambda t: np.ones_like(t, dtype=float))
    return Term(name, lambda t: np.power(t, k), lambda t: k * np.power(t, k - 1))


_PATTERNS: list[tuple[re.Pattern, Callable[[re.Match, str], Term]]] = []


def _pattern(regex: str):
    def register(builder):
        _PATTERNS.append((re.compile(rf"^{regex}$"), builder))
        return builder

    return register


@_pattern(rf"(?P<k>[+-]?{_NUM})")
def _p_const(m, name):
    return _const(float(m["k"]))


@_pattern(rf"{_COEF}t(?:(?:\^|\*\*)\(?(?P<k>[+-]?{_NUM})\)?)?")
def _p_pow(m, name):
    c = _coef(m["c"])
    k = float(m["k"]) if m["k"] else 1.0
    if c == 1.0:
        return _power(k, name)
    base = _power(k, name)
    return Term(name, lambda t: c * base.func(t), lambda t: c * base.deriv(t))


@_pattern(rf"1/t(?:(?:\^|\*\*)\(?(?P<k>[+-]?{_NUM})\)?)?")
def _p_recip(m, name):
    return _power(-float(m["k"] or 1.0), name)


@_pattern(r"sqrt\(t\)")
def _p_sqrt(m, name):
    return _power(0.5, name)


@_pattern(r"log\(t\)")
def _p_log(m, name):
    return Term(name, np.log, lambda t: 1.0 / t)


@_pattern(rf"(?P<fn>sin|cos)\({_COEF}t\)")
def _p_trig(m, name):
    c = _coef(m["c"])
    if m["fn"] == "sin":
        return Term(name, lambda t: np.sin(c * t), lambda t: c * np.cos(c * t))
    return Term(name, lambda t: np.cos(c * t), lambda t: -c * np.sin(c * t))


@_pattern(rf"exp\({_COEF}t\)")
def _p_exp(m, name):
    c = _coef(m["c"])
    return Term(name, lambda t: np.exp(c * t), lambda t: c * np.exp(c * t))


def parse_term(text: str) -> Term:
    """Parse one catalog entry such as ``"t^2"``, ``"cos(2t)"`` or ``"1/t"``."""
    if not isinstance(text, str):
        raise ModelError(f"basis component must be a string, got {text!r}")
    key = text.replace(" ", "")
    for regex, builder in _PATTERNS:
        m = regex.match(key)
        if m:
            return builder(m, key)
    raise ModelError(f"unknown basis component {text!r}")


# ---------------------------------------------------------------------------
# vector bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveBasis:
    """Vector of regression functions ``f(t) = (f_1(t), ..., f_dim(t))``."""

    name: str
    terms: tuple[Term, ...]

    @classmethod
    def from_names(cls, name: str, components) -> "CurveBasis":
        return cls(name, tuple(parse_term(c) for c in components))

    @property
    def dim(self) -> int:
        return len(self.terms)

    @property
    def components(self) -> list[str]:
        return [term.name for term in self.terms]

    def eval(self, t):
        """Values at ``t``; shape ``(dim,)`` for scalar t, ``(dim, m)`` otherwise."""
        t = np.asarray(t, dtype=float)
        return np.array([term.func(t) for term in self.terms], dtype=float).reshape((self.dim,) + t.shape)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.array([term.deriv(t) for term in self.terms], dtype=float).reshape((self.dim,) + t.shape)

    def concat(self, other: "CurveBasis", name: str | None = None) -> "CurveBasis":
        return CurveBasis(name or f"{self.name}+{other.name}", self.terms + other.terms)


F_A = CurveBasis.from_names("f_A", ["t", "sin(t)", "cos(t)"])
F_B = CurveBasis.from_names("f_B", ["t^2", "cos(t)", "cos(2t)"])
F_C = CurveBasis.from_names("f_C", ["t", "log(t)", "1/t"])

BUILTIN_BASES = {b.name: b for b in (F_A, F_B, F_C)}


def basis_from_spec(spec, name: str = "basis") -> CurveBasis:
    """Basis from a built-in name (``"f_A"``) or a list of catalog entries."""
    if isinstance(spec, str):
        if spec in BUILTIN_BASES:
            return BUILTIN_BASES[spec]
        raise ModelError(f"unknown built-in basis {spec!r}; expected one of {sorted(BUILTIN_BASES)}")
    if isinstance(spec, (list, tuple)):
        return CurveBasis.from_names(name, spec)
    raise ModelError(f"basis must be a name or a list of components, got {type(spec).__name__}")


# ---------------------------------------------------------------------------
# composite model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Separate:
    f1: CurveBasis
    f2: CurveBasis


@dataclass(frozen=True)
class Shared:
    f0: CurveBasis
    f1t: CurveBasis
    f2t: CurveBasis


@dataclass(frozen=True)
class General:
    note: str = ""


Structure = Union[Separate, Shared, General]


@dataclass(frozen=True)
class TimeSubstitution:
    """Change of variables ``t = phi(s)`` used to place quadrature nodes.

    Transformed models live on intervals such as ``[e^2, e^20]`` where
    uniform panels are hopeless; integrating over ``s`` instead keeps the
    composite rule accurate.
    """

    s_interval: tuple[float, float]
    phi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dphi: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _stack_columns(col1: Callable, col2: Callable) -> Callable:
    def evaluate(t: np.ndarray) -> np.ndarray:
        # (m,) -> (m, p, 2)
        return np.stack([col1(t).T, col2(t).T], axis=-1)

    return evaluate


@dataclass(frozen=True)
class CompositeModel:
    """The (p x 2) regression matrix ``F(t)`` on ``[a, b]``.

    ``F(t)`` and ``Fdot(t)`` return arrays of shape ``(p, 2)`` for scalar
    ``t`` and ``(m, p, 2)`` for a vector of ``m`` times.
    """

    interval: tuple[float, float]
    p: int
    structure: Structure
    _eval: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    _deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    substitution: TimeSubstitution | None = field(default=None, repr=False, compare=False)

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def F(self, t):
        t = np.asarray(t, dtype=float)
        out = self._eval(np.atleast_1d(t).ravel())
        return out[0] if t.ndim == 0 else out.reshape(t.shape + (self.p, 2))

    def Fdot(self, t):
        t = np.asarray(t, dtype=float)
        out = self._deriv(np.atleast_1d(t).ravel())
        return out[0] if t.ndim == 0 else out.reshape(t.shape + (self.p, 2))

    def group_basis(self, group: int) -> CurveBasis:
        """Regression vector ``f_group`` of the individual model for one group."""
        _check_group(group)
        s = self.structure
        if isinstance(s, Separate):
            return s.f1 if group == 1 else s.f2
        if isinstance(s, Shared):
            return s.f0.concat(s.f1t if group == 1 else s.f2t, name=f"f{group}")
        raise ModelError("group decomposition unavailable for a general model")

    def group_indices(self, group: int) -> np.ndarray:
        """Positions of the group's own parameter vector inside ``theta``."""
        _check_group(group)
        s = self.structure
        if isinstance(s, Separate):
            p1 = s.f1.dim
            return np.arange(p1) if group == 1 else np.arange(p1, self.p)
        if isinstance(s, Shared):
            p0, q1 = s.f0.dim, s.f1t.dim
            own = np.arange(p0, p0 + q1) if group == 1 else np.arange(p0 + q1, self.p)
            return np.concatenate([np.arange(p0), own])
        raise ModelError("group decomposition unavailable for a general model")

    def contains(self, t, tol: float = 1e-12) -> bool:
        t = np.asarray(t, dtype=float)
        span = self.b - self.a
        return bool(np.all((t >= self.a - tol * span) & (t <= self.b + tol * span)))


def _check_group(group: int) -> None:
    if group not in (1, 2):
        raise ModelError(f"group must be 1 or 2, got {group!r}")


def _check_interval(interval) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in interval)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"interval must be a pair of numbers, got {interval!r}") from exc
    if not (np.isfinite(a) and np.isfinite(b)) or a < 0 or a >= b:
        raise ModelError(f"interval must satisfy 0 <= a < b, got ({a}, {b})")
    return a, b


def _check_defined(basis: CurveBasis, interval: tuple[float, float]) -> None:
    grid = np.linspace(*interval, 200)
    with np.errstate(all="ignore"):
        ok = np.all(np.isfinite(basis.eval(grid))) and np.all(np.isfinite(basis.deriv(grid)))
    if not ok:
        raise ModelError(f"basis {basis.name!r} is not finite on [{interval[0]}, {interval[1]}]")


def _check_independent(model: CompositeModel) -> None:
    grid = np.linspace(model.a, model.b, 200)
    rows = model.F(grid)  # (m, p, 2)
    gram = np.einsum("mjc,mkc->jk", rows, rows)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond >= GRAM_CONDITION_LIMIT:
        raise ModelError(f"regression functions are numerically dependent (Gram condition {cond:.3g})")


def _zeros(dim: int) -> Callable:
    return lambda t: np.zeros((dim,) + np.shape(t))


def build_separate(f1: CurveBasis, f2: CurveBasis, interval) -> CompositeModel:
    """Block model ``F^T = [[f1^T, 0], [0, f2^T]]`` with ``p = p1 + p2``."""
    interval = _check_interval(interval)
    for f in (f1, f2):
        if f.dim == 0:
            raise ModelError(f"basis {f.name!r} is empty")
        _check_defined(f, interval)
    p1, p2 = f1.dim, f2.dim

    def col1(t):
        return np.concatenate([f1.eval(t), _zeros(p2)(t)])

    def col2(t):
        return np.concatenate([_zeros(p1)(t), f2.eval(t)])

    def dcol1(t):
        return np.concatenate([f1.deriv(t), _zeros(p2)(t)])

    def dcol2(t):
        return np.concatenate([_zeros(p1)(t), f2.deriv(t)])

    model = CompositeModel(
        interval, p1 + p2, Separate(f1, f2), _stack_columns(col1, col2), _stack_columns(dcol1, dcol2)
    )
    _check_independent(model)
    return model


def build_shared(f0: CurveBasis, f1t: CurveBasis, f2t: CurveBasis, interval) -> CompositeModel:
    """Model with common parameters: rows ``(f0, f1t, 0)`` and ``(f0, 0, f2t)``."""
    interval = _check_interval(interval)
    if f0.dim == 0:
        return build_separate(f1t, f2t, interval)
    for f in (f0, f1t, f2t):
        _check_defined(f, interval)
    q1, q2 = f1t.dim, f2t.dim

    def cols(ev0, ev1, ev2):
        def col1(t):
            return np.concatenate([ev0(t), ev1(t), _zeros(q2)(t)])

        def col2(t):
            return np.concatenate([ev0(t), _zeros(q1)(t), ev2(t)])

        return _stack_columns(col1, col2)

    model = CompositeModel(
        interval,
        f0.dim + q1 + q2,
        Shared(f0, f1t, f2t),
        cols(f0.eval, f1t.eval, f2t.eval),
        cols(f0.deriv, f1t.deriv, f2t.deriv),
    )
    _check_independent(model)
    return model


def build_general(column1: CurveBasis, column2: CurveBasis, interval) -> CompositeModel:
    """Arbitrary ``F``: ``column1`` holds ``F_{1,j}``, ``column2`` holds ``F_{2,j}``.

    Zero entries are written as the constant ``"0"``.
    """
    interval = _check_interval(interval)
    if column1.dim != column2.dim or column1.dim == 0:
        raise ModelError(f"columns must have equal positive length, got {column1.dim} and {column2.dim}")
    for f in (column1, column2):
        _check_defined(f, interval)
    model = CompositeModel(
        interval,
        column1.dim,
        General(),
        _stack_columns(column1.eval, column2.eval),
        _stack_columns(column1.deriv, column2.deriv),
    )
    _check_independent(model)
    return model


def difference_contrast(model: CompositeModel, t):
    """Vector ``c(t)`` with ``c(t)^T theta = F_1^T(t) theta - F_2^T(t) theta``.

    Returns shape ``(p,)`` for scalar ``t`` and ``(m, p)`` for a vector.
    """
    if not model.contains(t):
        raise ModelError(f"t outside [{model.a}, {model.b}]")
    F = model.F(t)
    return F[..., 0] - F[..., 1]
