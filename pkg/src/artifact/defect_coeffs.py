"""Cutoffs chi_j and amplitude coefficients a_j, b_j built from a defect field R.

Everything is evaluated slice by slice: given ``R(t)`` (and ``dR/dt`` when time
derivatives are needed) the cutoffs and coefficients follow in closed form,
with chain-rule derivatives of the smooth transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bumps import bump, smoothstep, transition
from .spectral_core import FunctionField, SpaceTimeField, time_quadrature


def sup_norm(R: SpaceTimeField, nodes=None) -> float:
    """``max_{t,x} |R(t,x)|`` over the quadrature nodes of ``R`` (Euclidean magnitude for vectors)."""
    if nodes is None:
        nodes, _ = time_quadrature(R.grid.n_t, R.special_intervals())
    best = 0.0
    for t in nodes:
        v = R.at(t)
        mag = np.sqrt(np.sum(v * v, axis=0)) if R.kind == "vector" else np.abs(v)
        best = max(best, float(np.max(mag)))
    return best


def choose_r(R, delta: float, d: int) -> float:
    """``r = min(1/4, delta / (8 d ||R||_inf))``; ``R`` may be a field or its sup norm."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sup = R if isinstance(R, (int, float)) else sup_norm(R)
    if sup == 0:
        return 0.25
    return min(0.25, delta / (8.0 * d * sup))


def time_cutoff(t, r: float, order: int = 0):
    """1-periodic ``zeta``: 0 outside ``[r/2, 1 - r/2]``, 1 on ``[r, 1 - r]``."""
    tau = np.mod(np.asarray(t, dtype=float), 1.0)
    w = r / 2.0
    up = smoothstep((tau - w) / w)
    down = smoothstep((1.0 - w - tau) / w)
    if order == 0:
        return up * down
    dup = smoothstep((tau - w) / w, 1) / w
    ddown = -smoothstep((1.0 - w - tau) / w, 1) / w
    if order == 1:
        return dup * down + up * ddown
    raise ValueError("time cutoff derivatives are available up to order 1")


@dataclass
class CutoffSet:
    """``chi_j(t, x) = eta(|R_j(t, x)|) * zeta(t)`` with ``eta`` rising on ``[delta/8d, delta/4d]``."""

    R: SpaceTimeField
    delta: float
    r: float

    def __post_init__(self):
        self.d = self.R.grid.d
        self.lo = self.delta / (8.0 * self.d)
        self.hi = self.delta / (4.0 * self.d)

    def zeta(self, t, order=0):
        return time_cutoff(t, self.r, order)

    def active(self, t) -> bool:
        return float(self.zeta(t)) > 0.0

    def intervals(self) -> list[tuple[float, float]]:
        r = self.r
        return [(r / 2, r), (1 - r, 1 - r / 2)]

    def chi(self, t, Rt: np.ndarray) -> np.ndarray:
        z = float(self.zeta(t))
        if z == 0.0:
            return np.zeros_like(Rt)
        return transition(np.abs(Rt), self.lo, self.hi) * z

    def chi_dt(self, t, Rt: np.ndarray, dRt: np.ndarray) -> np.ndarray:
        z = float(self.zeta(t))
        dz = float(self.zeta(t, 1))
        if z == 0.0 and dz == 0.0:
            return np.zeros_like(Rt)
        mag = np.abs(Rt)
        return transition(mag, self.lo, self.hi, 1) * np.sign(Rt) * dRt * z + transition(mag, self.lo, self.hi) * dz

    def field(self, j: int) -> FunctionField:
        return FunctionField(self.R.grid, lambda t: self.chi(t, self.R.at(t))[j], "scalar", f"chi_{j}",
                             intervals=self.intervals() + self.R.special_intervals())


def build_cutoffs(R: SpaceTimeField, delta: float, r: float) -> CutoffSet:
    return CutoffSet(R, delta, r)


@dataclass
class CoefficientSlice:
    """Coefficient data at one time; entries are ``None`` for components inactive at that time."""

    chi: list
    a: list
    b: list
    chi2R: list
    da: list | None = None
    dchi2R: list | None = None
    weights: list = field(default_factory=list)


class CoefficientSet:
    """Amplitudes ``a_j = nu w_j^{1/s-1/p} sign(-R_j) chi_j |R_j|^{1/p}`` and
    ``b_j = nu^{-1} w_j^{1/p-1/s} chi_j |R_j|^{1/p'}`` with time weights
    ``w_j(t) = ||chi_j R_j (t)||_{L^1} / ||chi_j R_j||_{L^1_{t,x}}``.

    Parameters
    ----------
    mollify : bool
        Replace ``||chi_j R_j(t)||_{L^1}`` by its periodic mollification of
        width ``r/8`` (16-point Gauss-Legendre convolution).  Off by default:
        with analytic time derivatives no smoothing is needed and the weight
        stays consistent with the norm bounds on ``a_j`` and ``b_j``.
    """

    def __init__(self, R: SpaceTimeField, cutoffs: CutoffSet, nu: float, p: float, s: float, mollify: bool = False):
        if nu <= 0:
            raise ValueError("nu must be positive")
        self.R, self.cutoffs, self.nu, self.p, self.s = R, cutoffs, float(nu), float(p), float(s)
        self.d = R.grid.d
        self.p_prime = p / (p - 1.0)
        self.expo = 1.0 / s - 1.0 / p
        self.mollify = bool(mollify)
        self.use_weights = self.expo != 0.0
        self._gl = leggauss(16)
        nodes, weights = time_quadrature(R.grid.n_t, R.special_intervals() + cutoffs.intervals())
        totals = np.zeros(self.d)
        for t, w in zip(nodes, weights):
            totals += w * self._slice_l1(t, R.at(t))
        self.totals = totals
        self.degenerate = not np.any(totals > 0)

    # -- weights ------------------------------------------------------------
    def _slice_l1(self, t, Rt):
        chi = self.cutoffs.chi(t, Rt)
        return np.mean(np.abs(chi * Rt).reshape(self.d, -1), axis=1)

    def _slice_l1_dt(self, t, Rt, dRt):
        chi = self.cutoffs.chi(t, Rt)
        dchi = self.cutoffs.chi_dt(t, Rt, dRt)
        val = dchi * np.abs(Rt) + chi * np.sign(Rt) * dRt
        return np.mean(val.reshape(self.d, -1), axis=1)

    def slice_norms(self, t, Rt=None, dRt=None):
        """``(||chi_j R_j(t)||_{L^1}, d/dt of it)`` with optional mollification."""
        if not self.mollify:
            Rt = self.R.at(t) if Rt is None else Rt
            n = self._slice_l1(t, Rt)
            dn = None if dRt is None else self._slice_l1_dt(t, Rt, dRt)
            return n, dn
        width = self.cutoffs.r / 8.0
        xg, wg = self._gl
        kern = bump(0.5 * (xg + 1.0))
        dkern = bump(0.5 * (xg + 1.0), 1) * 0.5 / width
        norm = np.sum(wg * kern) * width
        n = np.zeros(self.d)
        dn = np.zeros(self.d)
        for xi, wi, k, dk in zip(xg, wg, kern, dkern):
            tau = t - width * xi
            val = self._slice_l1(tau, self.R.at(tau))
            n += wi * width * k * val
            dn += wi * width * dk * val
        return n / norm, dn / norm

    # -- evaluation -------------------------------------------------------------
    def evaluate(self, t, Rt: np.ndarray, dRt: np.ndarray | None = None) -> CoefficientSlice:
        d = self.d
        chi = self.cutoffs.chi(t, Rt)
        dchi = None if dRt is None else self.cutoffs.chi_dt(t, Rt, dRt)
        out = CoefficientSlice([None] * d, [None] * d, [None] * d, [None] * d,
                               None if dRt is None else [None] * d,
                               None if dRt is None else [None] * d, [1.0] * d)
        if not np.any(chi):
            return out
        if self.use_weights:
            n, dn = self.slice_norms(t, Rt, dRt)
        for j in range(d):
            cj = chi[j]
            if not np.any(cj) or self.totals[j] == 0.0:
                continue
            if self.use_weights:
                if n[j] <= 0.0:
                    continue
                w = n[j] / self.totals[j]
                wa, wb = w**self.expo, w ** (-self.expo)
            else:
                w, wa, wb = 1.0, 1.0, 1.0
            R_j = Rt[j]
            mag = np.abs(R_j)
            on = cj > 0
            safe = np.where(on, mag, 1.0)
            root_p = np.where(on, safe ** (1.0 / self.p), 0.0)
            out.chi[j] = cj
            out.weights[j] = w
            out.a[j] = self.nu * wa * np.sign(-R_j) * cj * root_p
            out.b[j] = wb / self.nu * cj * np.where(on, safe ** (1.0 / self.p_prime), 0.0)
            out.chi2R[j] = cj * cj * R_j
            if dRt is not None:
                dR_j = dRt[j]
                dcj = dchi[j]
                da = wa * (np.sign(-R_j) * dcj * root_p
                           - cj * np.where(on, safe ** (1.0 / self.p - 1.0), 0.0) * dR_j / self.p)
                if self.use_weights:
                    dw = dn[j] / self.totals[j]
                    da = da + self.expo * w ** (self.expo - 1.0) * dw * np.sign(-R_j) * cj * root_p
                out.da[j] = self.nu * da
                out.dchi2R[j] = 2.0 * cj * dcj * R_j + cj * cj * dR_j
        return out

    def a_field(self, j: int) -> FunctionField:
        def fn(t):
            sl = self.evaluate(t, self.R.at(t))
            return np.zeros(self.R.grid.shape) if sl.a[j] is None else sl.a[j]
        return FunctionField(self.R.grid, fn, "scalar", f"a_{j}", intervals=self.cutoffs.intervals())

    def b_field(self, j: int) -> FunctionField:
        def fn(t):
            sl = self.evaluate(t, self.R.at(t))
            return np.zeros(self.R.grid.shape) if sl.b[j] is None else sl.b[j]
        return FunctionField(self.R.grid, fn, "scalar", f"b_{j}", intervals=self.cutoffs.intervals())

    def norm_bounds(self, t, Rt=None):
        """Right-hand sides of the ``L^p`` / ``L^{p'}`` bounds on ``a_j(t)``, ``b_j(t)``."""
        n, _ = self.slice_norms(t, Rt)
        tot = np.where(self.totals > 0, self.totals, 1.0)
        live = self.totals > 0
        a_bound = np.where(live, self.nu * tot ** (1.0 / self.p - 1.0 / self.s) * n ** (1.0 / self.s), 0.0)
        b_exp = 1.0 - 1.0 / self.s
        b_bound = np.where(live, tot ** (1.0 / self.s - 1.0 / self.p) * n**b_exp / self.nu, 0.0)
        return a_bound, b_bound


def build_coefficients(R: SpaceTimeField, cutoffs: CutoffSet, nu: float, p: float, s: float, mollify: bool = False):
    return CoefficientSet(R, cutoffs, nu, p, s, mollify)
