"""Fixed-order composite Gauss-Legendre quadrature helpers.

These routines back the growth-clock integral and the density kernels.
They expect vectorized integrands (numpy in, numpy out) and favour a
fixed high order over adaptivity: every integrand in this package is
smooth away from the left endpoint, so composite panels of bounded
width reach near machine precision.
"""

from __future__ import annotations

import numpy as np

_NODE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    try:
        return _NODE_CACHE[order]
    except KeyError:
        xs, ws = np.polynomial.legendre.leggauss(order)
        _NODE_CACHE[order] = (xs, ws)
        return xs, ws


def panel_integrals(fn, edges: np.ndarray, order: int = 12) -> np.ndarray:
    """Integral of ``fn`` over each consecutive [edges[k], edges[k+1]].

    One vectorized call to ``fn`` covers every node of every panel.
    """
    edges = np.asarray(edges, dtype=float)
    xs, ws = _gl_nodes(order)
    a = edges[:-1]
    half = 0.5 * (edges[1:] - a)
    nodes = a[:, None] + half[:, None] * (xs[None, :] + 1.0)
    vals = fn(nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ ws)


def integrate(fn, a: float, b: float, *, max_panel: float = 0.5,
              order: int = 16) -> float:
    """Composite Gauss-Legendre integral of a smooth vectorized integrand."""
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    n = max(1, int(np.ceil((b - a) / max_panel)))
    edges = np.linspace(a, b, n + 1)
    return sign * float(panel_integrals(fn, edges, order=order).sum())


def integrate_graded(fn, a: float, b: float, *, levels: int = 40,
                     order: int = 12) -> float:
    """Integral over [a, b] with dyadic grading toward ``a``.

    Intended for densities with an integrable singularity at the left
    endpoint; each dyadic subpanel sees a smooth integrand.
    """
    if b <= a:
        return 0.0
    width = b - a
    cuts = [a + width * 2.0 ** (-k) for k in range(levels, 0, -1)]
    edges = np.array([a + width * 2.0 ** (-levels - 2)] + cuts + [b])
    return float(panel_integrals(fn, edges, order=order).sum())
