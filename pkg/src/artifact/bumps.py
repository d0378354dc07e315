"""One-dimensional closed forms shared by the spatial and temporal building blocks.

``bump`` is the mollifier ``exp(-1/(z(1-z)))`` on (0, 1) and ``smoothstep`` the
C-infinity transition built from ``exp(-1/x)``.  Derivatives are analytic.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

# exp(-1/q) underflows to exactly zero well before q reaches this value
_Q_FLOOR = 1e-3


def bump(z, order: int = 0) -> np.ndarray:
    """``d^order/dz^order exp(-1/(z(1-z)))``, zero outside (0, 1); ``order <= 3``."""
    if order not in (0, 1, 2, 3):
        raise ValueError("bump derivatives are available up to order 3")
    z = np.asarray(z, dtype=float)
    q = z * (1.0 - z)
    inside = q > _Q_FLOOR
    out = np.zeros(np.broadcast(z).shape)
    if not np.any(inside):
        return out
    zi = z[inside] if z.ndim else z
    qi = zi * (1.0 - zi)
    val = np.exp(-1.0 / qi)
    if order > 0:
        dq = 1.0 - 2.0 * zi
        u1 = dq / qi**2
        if order == 1:
            val = u1 * val
        else:
            u2 = -2.0 / qi**2 - 2.0 * dq**2 / qi**3
            if order == 2:
                val = (u2 + u1 * u1) * val
            else:
                u3 = 12.0 * dq / qi**3 + 6.0 * dq**3 / qi**4
                val = (u3 + 3.0 * u1 * u2 + u1**3) * val
    if z.ndim:
        out[inside] = val
    else:
        out = np.asarray(val)
    return out


class MarginBump:
    """``psi(y) = bump((y - m) / (1 - 2m))``: a bump supported on ``[m, 1 - m]``."""

    def __init__(self, margin: float = 0.125):
        if not 0.0 < margin <= 0.25:
            raise ValueError(f"margin must lie in (0, 1/4], got {margin}")
        self.margin = margin
        self.width = 1.0 - 2.0 * margin

    def __call__(self, y, order: int = 0) -> np.ndarray:
        z = (np.asarray(y, dtype=float) - self.margin) / self.width
        return bump(z, order) / self.width**order

    def integral(self, fn, panels: int = 64, nodes: int = 20) -> float:
        """Composite Gauss-Legendre integral of ``fn(y)`` over the support."""
        y, w = support_quadrature(self.margin, 1.0 - self.margin, panels, nodes)
        return float(np.sum(w * fn(y)))


def support_quadrature(a: float, b: float, panels: int = 64, nodes: int = 20):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    xg, wg = leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    y = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return y, w


def _e(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(np.broadcast(x).shape)
    pos = x > _Q_FLOOR
    out[pos] = np.exp(-1.0 / x[pos])
    return out, pos


def _smoothstep_mid(x, order):
    # x strictly inside (0, 1)
    y = 1.0 - x
    a = np.where(x > _Q_FLOOR, np.exp(-1.0 / np.maximum(x, _Q_FLOOR)), 0.0)
    b = np.where(y > _Q_FLOOR, np.exp(-1.0 / np.maximum(y, _Q_FLOOR)), 0.0)
    den = a + b
    if order == 0:
        return a / den
    xs = np.maximum(x, _Q_FLOOR)
    ys = np.maximum(y, _Q_FLOOR)
    a1 = a / xs**2
    b1 = -b / ys**2
    num = a1 * b - a * b1
    if order == 1:
        return num / den**2
    a2 = a * (1.0 / xs**4 - 2.0 / xs**3)
    b2 = b * (1.0 / ys**4 - 2.0 / ys**3)
    dnum = a2 * b - a * b2
    dden = 2.0 * den * (a1 + b1)
    return (dnum * den**2 - num * dden) / den**4


def smoothstep(x, order: int = 0) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``; derivatives up to order 2."""
    if order not in (0, 1, 2):
        raise ValueError("smoothstep derivatives are available up to order 2")
    x = np.asarray(x, dtype=float)
    out = (x >= 1.0).astype(float) if order == 0 else np.zeros(x.shape)
    mid = (x > 0.0) & (x < 1.0)
    if x.ndim == 0:
        return _smoothstep_mid(x, order) if mid else out
    if np.any(mid):
        out[mid] = _smoothstep_mid(x[mid], order)
    return out


def transition(v, lo: float, hi: float, order: int = 0) -> np.ndarray:
    """``smoothstep((v - lo)/(hi - lo))`` and its derivatives in ``v``."""
    width = hi - lo
    return smoothstep((np.asarray(v, dtype=float) - lo) / width, order) / width**order
