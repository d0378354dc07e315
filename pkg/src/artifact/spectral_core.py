"""Uniform periodic grids on T^d x [0, 1), FFT calculus and norm quadrature.

All spatial operators act on real samples through ``scipy.fft.rfftn``.  The
derivative symbol is ``2*pi*i*k`` with the Nyquist mode dropped, so every
operator maps real fields to real fields and constants to exactly zero.

Space-time fields are lazy: they are evaluated one time slice at a time,
because a full ``n_t x n_x^d`` array does not fit in memory at the sizes the
construction needs.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft as sfft
from numpy.polynomial.legendre import leggauss

TWO_PI = 2.0 * np.pi


def fft_workers() -> int:
    """Worker count for FFTs, capped by the ``CI_THREADS`` environment variable."""
    try:
        return max(1, int(os.environ.get("CI_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the unit torus T^d together with a periodic time grid.

    Attributes
    ----------
    d : int
        Spatial dimension.
    n_x : int
        Samples per spatial axis (power of two, shared by all axes).
    n_t : int
        Time samples over [0, 1).
    """

    d: int = 3
    n_x: int = 64
    n_t: int = 64

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d}")
        if self.n_x < 4 or self.n_x & (self.n_x - 1):
            raise ValueError(f"n_x must be a power of two >= 4, got {self.n_x}")
        if self.n_t < 4:
            raise ValueError(f"n_t must be >= 4, got {self.n_t}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_x

    @property
    def dt(self) -> float:
        return 1.0 / self.n_t

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_x,) * self.d

    @property
    def size(self) -> int:
        return self.n_x**self.d

    @property
    def x(self) -> np.ndarray:
        """1-D node coordinates ``i / n_x``."""
        return np.arange(self.n_x) / self.n_x

    @property
    def t(self) -> np.ndarray:
        """Time nodes ``m / n_t``."""
        return np.arange(self.n_t) / self.n_t

    def coord(self, axis: int) -> np.ndarray:
        """Node coordinate along ``axis`` shaped to broadcast against the grid."""
        shape = [1] * self.d
        shape[axis] = self.n_x
        return self.x.reshape(shape)

    def with_(self, **changes) -> "Grid":
        values = {"d": self.d, "n_x": self.n_x, "n_t": self.n_t}
        values.update(changes)
        return Grid(**values)


@lru_cache(maxsize=16)
def _wavenumbers(n: int, d: int) -> tuple[np.ndarray, ...]:
    ks = []
    for axis in range(d):
        if axis == d - 1:
            k = np.fft.rfftfreq(n, 1.0 / n)
        else:
            k = np.fft.fftfreq(n, 1.0 / n)
        shape = [1] * d
        shape[axis] = k.size
        ks.append(k.reshape(shape))
    return tuple(ks)


def wavenumbers(grid: Grid) -> tuple[np.ndarray, ...]:
    """Integer wavevector components in rfftn layout (broadcastable)."""
    return _wavenumbers(grid.n_x, grid.d)


@lru_cache(maxsize=16)
def _deriv_symbols(n: int, d: int) -> tuple[np.ndarray, ...]:
    out = []
    for k in _wavenumbers(n, d):
        kk = k.copy()
        kk[np.abs(kk) == n // 2] = 0.0
        out.append(1j * TWO_PI * kk)
    return tuple(out)


def derivative_symbols(grid: Grid) -> tuple[np.ndarray, ...]:
    """``2*pi*i*k`` per axis with the Nyquist mode set to zero."""
    return _deriv_symbols(grid.n_x, grid.d)


@lru_cache(maxsize=16)
def _inverse_laplacian(n: int, d: int) -> np.ndarray:
    sym = _deriv_symbols(n, d)
    lap = sum((s * s).real for s in sym)
    inv = np.zeros_like(lap)
    nz = lap != 0
    inv[nz] = 1.0 / lap[nz]
    return inv


def inverse_laplacian_symbol(grid: Grid) -> np.ndarray:
    """Symbol of the discrete inverse Laplacian; zero on the unresolved corner modes."""
    return _inverse_laplacian(grid.n_x, grid.d)


def fft(values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, workers=fft_workers())


def ifft(spectrum: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.irfftn(spectrum, s=grid.shape, workers=fft_workers())


def fft_vector(values: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, values.ndim))
    return sfft.rfftn(values, axes=axes, workers=fft_workers())


def ifft_vector(spectrum: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(1, grid.d + 1))
    return sfft.irfftn(spectrum, s=grid.shape, axes=axes, workers=fft_workers())


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


def _checked(values, shape) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples of a periodic function on ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _checked(self.values, self.grid.shape))

    @cached_property
    def spectrum(self) -> np.ndarray:
        return fft(self.values)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "ScalarField":
        coords = [grid.coord(a) for a in range(grid.d)]
        return cls(grid, np.broadcast_to(fn(*coords), grid.shape).astype(np.float64))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """``d`` scalar components on one grid, stored as an array of shape ``(d, n_x, ...)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        shape = (self.grid.d,) + self.grid.shape
        object.__setattr__(self, "values", _checked(self.values, shape))

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise ValueError("all components must share one grid")
        return cls(grid, np.stack([c.values for c in components]))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.d,) + grid.shape))

    @property
    def components(self) -> tuple[ScalarField, ...]:
        return tuple(ScalarField(self.grid, v) for v in self.values)

    def __add__(self, other):
        return VectorField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return VectorField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        other = _vals(other)
        if isinstance(other, np.ndarray) and other.shape == self.grid.shape:
            other = other[None]
        return VectorField(self.grid, self.values * other)

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, (ScalarField, VectorField)) else x


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------


def derivative_array(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    if not 0 <= axis < grid.d:
        raise ValueError(f"axis must lie in [0, {grid.d}), got {axis}")
    return ifft(fft(values) * derivative_symbols(grid)[axis], grid)


def divergence_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    sym = derivative_symbols(grid)
    acc = None
    for a in range(grid.d):
        term = fft(values[a]) * sym[a]
        acc = term if acc is None else acc + term
    return ifft(acc, grid)


def gradient_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    spec = fft(values)
    return np.stack([ifft(spec * s, grid) for s in derivative_symbols(grid)])


def spectral_derivative(f: ScalarField, axis: int) -> ScalarField:
    """``df/dx_axis`` via the Fourier symbol ``2*pi*i*k_axis``."""
    if not 0 <= axis < f.grid.d:
        raise ValueError(f"axis must lie in [0, {f.grid.d}), got {axis}")
    return ScalarField(f.grid, ifft(f.spectrum * derivative_symbols(f.grid)[axis], f.grid))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, divergence_array(v.values, v.grid))


def gradient(f: ScalarField) -> VectorField:
    sym = derivative_symbols(f.grid)
    return VectorField(f.grid, np.stack([ifft(f.spectrum * s, f.grid) for s in sym]))


def spatial_mean(f) -> float:
    """Rectangle-rule mean over the torus."""
    return float(np.mean(_vals(f)))


def corner_projection(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Projection onto the ``2^d`` modes with every ``k_a`` in ``{0, n_x/2}``.

    These are exactly the modes annihilated by every discrete derivative.  The
    projection equals the average of ``values`` over nodes sharing the parity
    pattern of each node; for band-limited fields only the mean survives.
    """
    n, d = grid.n_x, grid.d
    blocks = np.asarray(values).reshape(sum(((n // 2, 2) for _ in range(d)), ()))
    parity_means = blocks.mean(axis=tuple(range(0, 2 * d, 2)))
    return np.tile(parity_means, (n // 2,) * d)


def ck_norm(values: np.ndarray, grid: Grid, k: int, tol: float = 1e-13) -> float:
    """``max_{|alpha| <= k} ||d^alpha f||_inf`` over grid samples.

    Axes without spectral content are pruned from the multi-index enumeration,
    which keeps large ``k`` affordable for low-dimensional test functions.
    """
    arr = np.asarray(values, dtype=float)
    comps = arr if arr.ndim == grid.d + 1 else arr[None]
    best = 0.0
    sym = derivative_symbols(grid)
    for comp in comps:
        spec = fft(comp)
        scale = np.max(np.abs(spec)) if spec.size else 0.0
        best = max(best, float(np.max(np.abs(comp))))
        if scale == 0.0:
            continue
        active = []
        for a in range(grid.d):
            energy = np.abs(spec * sym[a])
            if np.max(energy) > tol * scale:
                active.append(a)
        for order in range(1, k + 1):
            for combo in itertools.combinations_with_replacement(active, order):
                mult = np.ones((1,) * grid.d, dtype=complex)
                for a in combo:
                    mult = mult * sym[a]
                best = max(best, float(np.max(np.abs(ifft(spec * mult, grid)))))
    return best


def energy_bandwidth(values: np.ndarray, grid: Grid, fraction: float = 0.999) -> int:
    """Smallest ``K`` such that modes with ``max_a |k_a| <= K`` carry ``fraction`` of the energy."""
    spec = np.abs(fft(values)) ** 2
    # rfftn halves the last axis: double the interior columns to count the mirrored modes
    weight = np.full(spec.shape[-1], 2.0)
    weight[0] = 1.0
    if grid.n_x % 2 == 0:
        weight[-1] = 1.0
    spec = spec * weight
    total = spec.sum()
    if total == 0.0:
        return 0
    kmax = np.zeros(spec.shape)
    for k in wavenumbers(grid):
        kmax = np.maximum(kmax, np.abs(k))
    flat_k = kmax.ravel()
    order = np.argsort(flat_k, kind="stable")
    cum = np.cumsum(spec.ravel()[order])
    idx = int(np.searchsorted(cum, fraction * total))
    idx = min(idx, order.size - 1)
    return int(flat_k[order[idx]])


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _check_exponent(p: float, name: str = "p") -> None:
    if not (p == math.inf or p >= 1):
        raise ValueError(f"{name} must lie in [1, inf], got {p}")


def lp_norm_array(values: np.ndarray, p: float, vector: bool = False) -> float:
    _check_exponent(p)
    v = np.asarray(values)
    mag = np.sqrt(np.sum(v * v, axis=0)) if vector else np.abs(v)
    if p == math.inf:
        return float(np.max(mag))
    if p == 1:
        return float(np.mean(mag))
    if p == 2:
        return float(np.sqrt(np.mean(mag * mag)))
    return float(np.mean(mag**p) ** (1.0 / p))


def lp_norm(f, p: float) -> float:
    """``(mean |f|^p)^{1/p}``; vector fields use the Euclidean pointwise magnitude."""
    return lp_norm_array(_vals(f), p, vector=isinstance(f, VectorField))


def sobolev_array(values: np.ndarray, grid: Grid, q: float) -> float:
    """``||v||_q + ||grad v||_q`` with Frobenius magnitude for the gradient tensor."""
    if not (q >= 1 and q != math.inf):
        raise ValueError(f"q must lie in [1, inf), got {q}")
    v = np.asarray(values)
    comps = v if v.ndim == grid.d + 1 else v[None]
    sq = np.zeros(grid.shape)
    for comp in comps:
        for g in gradient_array(comp, grid):
            sq += g * g
    vec = v.ndim == grid.d + 1
    return lp_norm_array(v, q, vector=vec) + lp_norm_array(np.sqrt(sq), q)


def sobolev_norm(v, q: float) -> float:
    return sobolev_array(_vals(v), v.grid, q)


# ---------------------------------------------------------------------------
# space-time fields
# ---------------------------------------------------------------------------


def fd4(at: Callable[[float], np.ndarray], t: float, h: float) -> np.ndarray:
    """Fourth-order central difference of ``at`` at ``t`` with step ``h``."""
    return (-at(t + 2 * h) + 8.0 * at(t + h) - 8.0 * at(t - h) + at(t - 2 * h)) / (12.0 * h)


class SpaceTimeField:
    """A scalar or vector field on ``[0, 1) x T^d`` evaluated lazily in time.

    Subclasses implement :meth:`at`.  :meth:`dt` defaults to fourth-order
    central differences with the grid time step; subclasses that know their
    time dependence in closed form override the ``"exact"`` scheme.
    """

    periodic_in_time = True

    def __init__(self, grid: Grid, kind: str = "scalar", name: str = ""):
        if kind not in ("scalar", "vector"):
            raise ValueError("kind must be 'scalar' or 'vector'")
        self.grid = grid
        self.kind = kind
        self.name = name

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.grid.shape if self.kind == "scalar" else (self.grid.d,) + self.grid.shape

    def at(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def dt(self, t: float, scheme: str = "exact") -> np.ndarray:
        return fd4(self.at, t, self.grid.dt)

    def slice(self, m: int) -> np.ndarray:
        return self.at((m % self.grid.n_t) / self.grid.n_t)

    def field(self, t: float):
        cls = ScalarField if self.kind == "scalar" else VectorField
        return cls(self.grid, self.at(t))

    def special_intervals(self) -> list[tuple[float, float]]:
        """Time intervals where the field varies faster than the time grid resolves."""
        return []

    def is_zero(self) -> bool:
        return False


class ZeroField(SpaceTimeField):
    def at(self, t):
        return np.zeros(self.value_shape)

    def dt(self, t, scheme="exact"):
        return np.zeros(self.value_shape)

    def is_zero(self):
        return True


class SampledField(SpaceTimeField):
    """Field stored at the ``n_t`` time nodes, trigonometrically interpolated between them."""

    def __init__(self, grid: Grid, data: np.ndarray, kind: str = "scalar", name: str = ""):
        super().__init__(grid, kind, name)
        data = np.asarray(data, dtype=np.float64)
        if data.shape != (grid.n_t,) + self.value_shape:
            raise ValueError(f"expected {(grid.n_t,) + self.value_shape}, got {data.shape}")
        self.data = data

    @cached_property
    def _tspec(self) -> np.ndarray:
        return np.fft.rfft(self.data, axis=0) / self.grid.n_t

    def _node(self, t: float) -> int | None:
        x = t * self.grid.n_t
        m = round(x)
        if abs(x - m) < 1e-9:
            return int(m) % self.grid.n_t
        return None

    def _interp(self, t: float, order: int) -> np.ndarray:
        n = self.grid.n_t
        c = self._tspec
        out = np.zeros(self.value_shape)
        for k in range(c.shape[0]):
            w = 2.0 if (0 < k < n / 2) else 1.0
            if order and 2 * k == n:
                continue
            phase = np.exp(1j * TWO_PI * k * t) * (1j * TWO_PI * k) ** order
            out += w * (c[k] * phase).real
        return out

    def at(self, t):
        m = self._node(t)
        if m is not None:
            return self.data[m]
        return self._interp(t, 0)

    def dt(self, t, scheme="exact"):
        if scheme == "exact":
            return self._interp(t, 1)
        return super().dt(t, scheme)


class SeparableField(SpaceTimeField):
    """``sum_m c_m(t) X_m(x)`` with time factors that know their own derivatives.

    Each factor is a callable ``c(t, order=0)``.
    """

    def __init__(self, grid: Grid, terms: Iterable, kind: str = "scalar", name: str = ""):
        super().__init__(grid, kind, name)
        self.terms = [(c, np.asarray(x, dtype=np.float64)) for c, x in terms]
        for _, x in self.terms:
            if x.shape != self.value_shape:
                raise ValueError(f"spatial factor has shape {x.shape}, expected {self.value_shape}")

    def _eval(self, t, order):
        out = np.zeros(self.value_shape)
        for c, x in self.terms:
            coef = float(c(t, order))
            if coef != 0.0:
                out += coef * x
        return out

    def at(self, t):
        return self._eval(t, 0)

    def dt(self, t, scheme="exact"):
        if scheme == "exact":
            return self._eval(t, 1)
        return super().dt(t, scheme)

    def time_derivative(self) -> "SeparableField":
        return SeparableField(
            self.grid, [(_Shifted(c, 1), x) for c, x in self.terms], self.kind, self.name + "_t"
        )

    def map_spatial(self, fn: Callable[[np.ndarray], np.ndarray], kind: str) -> "SeparableField":
        """Apply a linear spatial operator to every spatial factor."""
        return SeparableField(self.grid, [(c, fn(x)) for c, x in self.terms], kind)

    def is_zero(self):
        return all(not np.any(x) for _, x in self.terms)


class _Shifted:
    def __init__(self, factor, shift: int):
        self.factor = factor
        self.shift = shift

    def __call__(self, t, order=0):
        return self.factor(t, order + self.shift)


class Harmonic:
    """Time factor ``amp * cos(2*pi*freq*t + phase)`` with derivatives of every order."""

    def __init__(self, freq: int, phase: float = 0.0, amp: float = 1.0):
        self.freq, self.phase, self.amp = freq, phase, amp

    def __call__(self, t, order=0):
        w = TWO_PI * self.freq
        return self.amp * w**order * math.cos(w * t + self.phase + order * math.pi / 2)


class Constant:
    def __init__(self, c: float = 1.0):
        self.c = c

    def __call__(self, t, order=0):
        return self.c if order == 0 else 0.0


class FunctionField(SpaceTimeField):
    """Field given by a callable ``fn(t) -> array``, with an optional exact derivative."""

    def __init__(self, grid, fn, kind="scalar", name="", dfn=None, intervals=()):
        super().__init__(grid, kind, name)
        self.fn = fn
        self.dfn = dfn
        self.intervals = list(intervals)

    def at(self, t):
        return np.asarray(self.fn(t), dtype=np.float64)

    def dt(self, t, scheme="exact"):
        if scheme == "exact" and self.dfn is not None:
            return np.asarray(self.dfn(t), dtype=np.float64)
        return super().dt(t, scheme)

    def special_intervals(self):
        return list(self.intervals)


def sample(field: SpaceTimeField) -> SampledField:
    """Materialise a lazy field at its time nodes."""
    data = np.stack([field.slice(m) for m in range(field.grid.n_t)])
    return SampledField(field.grid, data, field.kind, field.name)


# ---------------------------------------------------------------------------
# time quadrature and mixed norms
# ---------------------------------------------------------------------------


def merge_intervals(intervals) -> list[tuple[float, float]]:
    clipped = []
    for a, b in intervals:
        a, b = max(0.0, float(a)), min(1.0, float(b))
        if b > a:
            clipped.append((a, b))
    clipped.sort()
    out: list[list[float]] = []
    for a, b in clipped:
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def time_quadrature(n_t: int, intervals=(), n_gauss: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for integrals over one time period.

    Away from ``intervals`` this is the trapezoid rule on the time grid (the
    rectangle rule when no intervals are given).  Cells inside an interval get
    ``n_gauss`` Gauss-Legendre nodes, so narrow features such as ``g(kappa t)``
    with ``kappa >> n_t`` are integrated accurately.
    """
    special = merge_intervals(intervals)
    if not special:
        return np.arange(n_t) / n_t, np.full(n_t, 1.0 / n_t)
    xg, wg = leggauss(n_gauss)
    breaks = set(np.arange(n_t + 1) / n_t)
    for a, b in special:
        breaks.update((a, b))
    breaks = sorted(breaks)
    acc: dict[float, float] = {}

    def add(t, w):
        t = 0.0 if t >= 1.0 else t
        acc[t] = acc.get(t, 0.0) + w

    for b0, b1 in zip(breaks[:-1], breaks[1:]):
        if b1 <= b0:
            continue
        mid = 0.5 * (b0 + b1)
        if any(a <= mid <= b for a, b in special):
            half = 0.5 * (b1 - b0)
            for xi, wi in zip(xg, wg):
                add(mid + half * xi, half * wi)
        else:
            add(b0, 0.5 * (b1 - b0))
            add(b1, 0.5 * (b1 - b0))
    nodes = np.array(sorted(acc))
    return nodes, np.array([acc[t] for t in nodes])


def window_quadrature(a: float, b: float, n_t: int, intervals=(), n_gauss: int = 16):
    """Nodes and weights for integrals over ``[a, b]`` inside one period.

    Same rule as :func:`time_quadrature` (trapezoid between time nodes,
    Gauss-Legendre inside ``intervals``) with ``a`` and ``b`` added as breaks.
    """
    if not 0.0 <= a < b <= 1.0:
        raise ValueError("need 0 <= a < b <= 1")
    special = merge_intervals(intervals)
    xg, wg = leggauss(n_gauss)
    breaks = {a, b}
    breaks.update(t for t in np.arange(n_t + 1) / n_t if a < t < b)
    for lo, hi in special:
        breaks.update(v for v in (lo, hi) if a < v < b)
    breaks = sorted(breaks)
    acc: dict[float, float] = {}
    for b0, b1 in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (b0 + b1)
        half = 0.5 * (b1 - b0)
        if any(lo <= mid <= hi for lo, hi in special):
            for xi, wi in zip(xg, wg):
                t = mid + half * xi
                acc[t] = acc.get(t, 0.0) + half * wi
        else:
            acc[b0] = acc.get(b0, 0.0) + half
            acc[b1] = acc.get(b1, 0.0) + half
    nodes = np.array(sorted(acc))
    return np.mod(nodes, 1.0), np.array([acc[t] for t in nodes])


def combine_time(values: np.ndarray, weights: np.ndarray, s: float) -> float:
    """``L^s`` in time of the per-node spatial norms ``values``."""
    _check_exponent(s, "s")
    values = np.abs(np.asarray(values, dtype=float))
    if s == math.inf:
        return float(np.max(values)) if values.size else 0.0
    return float(np.sum(weights * values**s) ** (1.0 / s))


def mixed_norm(F: SpaceTimeField, s: float, p: float, quadrature=None) -> float:
    """``|| ||F(t)||_{L^p_x} ||_{L^s_t}`` over one period."""
    _check_exponent(s, "s")
    _check_exponent(p, "p")
    nodes, weights = quadrature or time_quadrature(F.grid.n_t, F.special_intervals())
    if s == math.inf:
        nodes, weights = F.grid.t, np.full(F.grid.n_t, F.grid.dt)
    vals = [lp_norm_array(F.at(t), p, vector=F.kind == "vector") for t in nodes]
    return combine_time(vals, weights, s)


# ---------------------------------------------------------------------------
# binary dumps
# ---------------------------------------------------------------------------


def dump_field(path_stem, values: np.ndarray, grid: Grid, kind: str, name: str, n_t: int | None = None):
    """Write little-endian float64 samples plus a JSON sidecar.

    Vector data is component-major; space-time data is time-major.
    Returns the two written paths.
    """
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data_path = stem.with_suffix(".bin")
    meta_path = stem.with_suffix(".json")
    np.ascontiguousarray(values, dtype="<f8").tofile(data_path)
    meta = {"d": grid.d, "n_x": grid.n_x, "n_t": n_t if n_t is not None else 1, "kind": kind, "name": name}
    meta_path.write_text(json.dumps(meta, indent=2))
    return data_path, meta_path


def load_field(path_stem):
    """Inverse of :func:`dump_field`: returns ``(values, meta)``."""
    stem = Path(path_stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    shape = (meta["n_x"],) * meta["d"]
    if meta["kind"] == "vector":
        shape = (meta["d"],) + shape
    if meta.get("n_t", 1) > 1:
        shape = (meta["n_t"],) + shape
    values = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(shape)
    return values, meta
