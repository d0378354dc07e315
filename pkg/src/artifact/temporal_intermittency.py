"""Intermittent time profiles g_kappa, gbar_kappa, gtilde_kappa and the primitive h_kappa.

The base bump ``g`` is the mollifier supported on [1/8, 7/8] scaled to unit
L^2 mass.  Inside one period ``g_kappa(t) = g(kappa * frac(t))``, so every
profile is evaluated in closed form at arbitrary ``t``; no time grid is ever
used for the fast factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .bumps import MarginBump, support_quadrature

G_MARGIN = 0.125


@lru_cache(maxsize=4)
def _base(margin: float, cells: int):
    psi = MarginBump(margin)
    xg, wg = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(margin, 1.0 - margin, cells + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = mid[:, None] + half[:, None] * xg[None, :]
    cell_mass = np.sum(half[:, None] * wg[None, :] * psi(pts) ** 2, axis=1)
    total = float(np.sum(cell_mass))
    scale = 1.0 / math.sqrt(total)
    prim = np.concatenate([[0.0], np.cumsum(cell_mass)]) / total
    prim[-1] = 1.0
    deriv = psi(edges) ** 2 * scale**2
    spline = CubicHermiteSpline(edges, prim, deriv)
    return psi, scale, spline


class BaseBump:
    """``g = c * psi`` with ``psi`` the mollifier on ``[margin, 1 - margin]`` and ``int g^2 = 1``.

    ``G(y) = int_0^y g^2`` is tabulated once on 4096 cells (exact cell masses
    from 20-point Gauss-Legendre) and interpolated with cubic Hermite splines
    using ``G' = g^2``.
    """

    def __init__(self, margin: float = G_MARGIN, cells: int = 4096):
        self.margin = margin
        self.psi, self.scale, self._prim = _base(margin, cells)

    def __call__(self, y, order: int = 0):
        return self.scale * self.psi(y, order)

    def primitive(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self.margin, 1.0 - self.margin
        inner = self._prim(np.clip(y, lo, hi))
        return np.where(y <= lo, 0.0, np.where(y >= hi, 1.0, inner))


def conjugate(s: float) -> float:
    """Hoelder conjugate ``s / (s - 1)`` with ``1 -> inf``."""
    return math.inf if s == 1 else s / (s - 1.0)


def inv(s: float) -> float:
    return 0.0 if s == math.inf else 1.0 / s


@dataclass
class TemporalProfiles:
    """Closed-form evaluators for the intermittent time profiles at concentration ``kappa``.

    Every evaluator accepts ``t`` (scalar or array, wrapped modulo 1) and a
    derivative ``order``.  ``g_kappa`` has derivatives up to order 3, ``h`` up to 2.
    """

    kappa: float
    s: float
    g: BaseBump = field(default_factory=BaseBump)

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.s < 1:
            raise ValueError(f"s must lie in [1, inf), got {self.s}")
        self.s_prime = conjugate(self.s)

    @property
    def bar_scale(self) -> float:
        return self.kappa ** inv(self.s_prime)

    @property
    def tilde_scale(self) -> float:
        return self.kappa ** (1.0 / self.s)

    def g_kappa(self, t, order: int = 0):
        tau = np.mod(np.asarray(t, dtype=float), 1.0)
        return self.kappa**order * self.g(self.kappa * tau, order)

    def g_bar(self, t, order: int = 0):
        return self.bar_scale * self.g_kappa(t, order)

    def g_tilde(self, t, order: int = 0):
        return self.tilde_scale * self.g_kappa(t, order)

    def h(self, t, order: int = 0):
        """``h(t) = int_0^t (gbar*gtilde - 1)``; ``order`` 1 and 2 give its derivatives."""
        tau = np.mod(np.asarray(t, dtype=float), 1.0)
        if order == 0:
            return self.g.primitive(self.kappa * tau) - tau
        if order == 1:
            return self.kappa * self.g(self.kappa * tau) ** 2 - 1.0
        if order == 2:
            y = self.kappa * tau
            return 2.0 * self.kappa**2 * self.g(y) * self.g(y, 1)
        raise ValueError("h derivatives are available up to order 2")

    def support_window(self) -> tuple[float, float]:
        """Interval in [0, 1) outside which ``g_kappa`` vanishes."""
        return self.g.margin / self.kappa, (1.0 - self.g.margin) / self.kappa

    def fast_windows(self, lam: int) -> list[tuple[float, float]]:
        """Support intervals of ``g_kappa(lam * t)`` inside one period."""
        a, b = self.support_window()
        return [((k + a) / lam, (k + b) / lam) for k in range(int(lam))]


def build_profiles(kappa: float, s: float) -> TemporalProfiles:
    return TemporalProfiles(kappa=kappa, s=s)


def eval_h(profiles: TemporalProfiles, t):
    return profiles.h(t)


_WHICH = ("g_kappa", "g_bar", "g_tilde")


def profile_norm(profiles: TemporalProfiles, which: str, m: int, r: float) -> float:
    """``||d^m/dt^m profile||_{L^r(0,1)}`` by composite Gauss-Legendre on the support window."""
    if which not in _WHICH:
        raise ValueError(f"which must be one of {_WHICH}")
    if m not in (0, 1, 2):
        raise ValueError("m must be 0, 1 or 2")
    if not (r == math.inf or r >= 1):
        raise ValueError(f"r must lie in [1, inf], got {r}")
    fn = getattr(profiles, which)
    a, b = profiles.support_window()
    if r == math.inf:
        t = np.linspace(a, b, 200001)
        return float(np.max(np.abs(fn(t, m))))
    t, w = support_quadrature(a, b, panels=128, nodes=20)
    return float(np.sum(w * np.abs(fn(t, m)) ** r) ** (1.0 / r))


def profile_product_integral(profiles: TemporalProfiles) -> float:
    """``int_0^1 gbar * gtilde dt`` by quadrature over the support window."""
    a, b = profiles.support_window()
    t, w = support_quadrature(a, b, panels=128, nodes=20)
    return float(np.sum(w * profiles.g_bar(t) * profiles.g_tilde(t)))


class Composed:
    """Time factor ``scale * f(lam * t)`` with chain-rule derivatives."""

    def __init__(self, fn, lam: float = 1.0, scale: float = 1.0):
        self.fn, self.lam, self.scale = fn, lam, scale

    def __call__(self, t, order: int = 0):
        return self.scale * self.lam**order * float(self.fn(self.lam * t, order))
