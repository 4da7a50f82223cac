"""Composite Gauss-Legendre quadrature for array-valued integrands."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss_legendre_nodes", "composite_gauss_legendre", "integrate"]

DEFAULT_NODES = 32
DEFAULT_PANELS = 64


@lru_cache(maxsize=None)
def _reference_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_nodes(a: float, b: float, nodes: int = DEFAULT_NODES, panels: int = DEFAULT_PANELS):
    """Nodes and weights of the composite rule on ``[a, b]`` (flattened)."""
    x, w = _reference_rule(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt


def composite_gauss_legendre(func, a, b, nodes=DEFAULT_NODES, panels=DEFAULT_PANELS, substitution=None):
    """Integrate ``func`` over ``[a, b]``.

    ``func`` maps a vector of ``m`` times to an array with leading axis ``m``.
    With ``substitution`` (a :class:`~corrdesign.model.TimeSubstitution`),
    nodes are placed in the reference variable ``s`` and ``t = phi(s)``; then
    ``a`` and ``b`` are ignored in favour of ``substitution.s_interval``.
    """
    if substitution is None:
        t, w = gauss_legendre_nodes(a, b, nodes, panels)
    else:
        s, w = gauss_legendre_nodes(*substitution.s_interval, nodes, panels)
        t = substitution.phi(s)
        w = w * substitution.dphi(s)
    values = np.asarray(func(t))
    return np.tensordot(w, values, axes=(0, 0))


def integrate(func, a, b, *, nodes=DEFAULT_NODES, panels=DEFAULT_PANELS, tol=1e-10, max_panels=4096,
              substitution=None):
    """Composite rule with an error estimate from panel doubling.

    Panels are doubled until the two estimates agree to ``tol`` relative to
    ``max(1, |value|)`` entrywise, or ``max_panels`` is hit.  Returns the
    finer estimate and the largest entrywise difference.
    """
    coarse = composite_gauss_legendre(func, a, b, nodes, panels, substitution)
    while True:
        fine = composite_gauss_legendre(func, a, b, nodes, 2 * panels, substitution)
        err = np.abs(fine - coarse)
        scale = np.maximum(1.0, np.abs(fine))
        if np.all(err <= tol * scale) or 2 * panels >= max_panels:
            return fine, float(np.max(err)) if err.size else 0.0
        panels *= 2
        coarse = fine
