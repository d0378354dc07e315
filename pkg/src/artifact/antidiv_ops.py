"""Anti-divergence ``R = Laplacian^{-1} grad``, the bilinear anti-divergence ``B`` and
measurements of the improved Hoelder inequality and of fast-oscillation mean decay.

On the grid ``div R f = f - P_c f`` where ``P_c`` projects onto the ``2^d``
corner modes (every ``k_a`` in ``{0, n/2}``), which reduces to the mean for
band-limited ``f``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spectral_core import (
    Grid,
    ScalarField,
    VectorField,
    ck_norm,
    derivative_symbols,
    divergence_array,
    energy_bandwidth,
    fft,
    ifft,
    ifft_vector,
    inverse_laplacian_symbol,
    lp_norm_array,
)


def antidiv_from_spectrum(spec: np.ndarray, grid: Grid) -> np.ndarray:
    """``R`` applied to a field given by its rfftn spectrum; returns a ``(d, ...)`` array."""
    base = spec * inverse_laplacian_symbol(grid)
    return ifft_vector(np.stack([base * s for s in derivative_symbols(grid)]), grid)


def anti_divergence_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    return antidiv_from_spectrum(fft(values), grid)


def anti_divergence(f: ScalarField) -> VectorField:
    """``R f = Laplacian^{-1} grad f`` with the zero mode dropped."""
    return VectorField(f.grid, antidiv_from_spectrum(f.spectrum, f.grid))


def bilinear_array(a: np.ndarray, f: np.ndarray, grid: Grid, Rf: np.ndarray | None = None, form: str = "consistent"):
    """``B(a, f)`` on raw arrays.

    ``form="consistent"`` evaluates ``a Rf - R(div(a Rf) - a f)``, which equals
    ``a Rf - R(grad a . Rf)`` whenever ``f`` has zero mean and satisfies
    ``div B = a f - P_c(a f)`` exactly on the grid.  ``form="literal"`` uses
    ``a Rf - R(grad a . Rf)`` as written, whose divergence identity only holds
    up to aliasing of the products.
    """
    if Rf is None:
        Rf = anti_divergence_array(f, grid)
    aRf = a[None] * Rf
    sym = derivative_symbols(grid)
    if form == "consistent":
        acc = -fft(a * f)
        for k in range(grid.d):
            acc = acc + sym[k] * fft(aRf[k])
    elif form == "literal":
        spec_a = fft(a)
        acc = 0.0
        for k in range(grid.d):
            acc = acc + fft(ifft(spec_a * sym[k], grid) * Rf[k])
    else:
        raise ValueError(f"unknown form {form!r}")
    return aRf - antidiv_from_spectrum(acc, grid)


def bilinear_antidivergence(a: ScalarField, f: ScalarField, form: str = "consistent") -> VectorField:
    """``B(a, f) = a Rf - R(grad a . Rf)``; warns when ``f`` is not mean-zero."""
    mean = float(np.mean(f.values))
    if abs(mean) > 1e-10:
        warnings.warn(f"B(a, f) with mean(f) = {mean:.3e}: the divergence identity needs mean-zero f")
    return VectorField(a.grid, bilinear_array(a.values, f.values, a.grid, form=form))


class BilinearAccumulator:
    """Accumulates ``sum_j B(a_j, f_j)`` with a single final application of ``R``."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.phys = None
        self.spec = None

    def add(self, a: np.ndarray, f: np.ndarray, Rf: np.ndarray) -> None:
        aRf = a[None] * Rf
        sym = derivative_symbols(self.grid)
        acc = -fft(a * f)
        for k in range(self.grid.d):
            acc = acc + sym[k] * fft(aRf[k])
        self.phys = aRf if self.phys is None else self.phys + aRf
        self.spec = acc if self.spec is None else self.spec + acc

    def result(self) -> np.ndarray | None:
        if self.phys is None:
            return None
        return self.phys - antidiv_from_spectrum(self.spec, self.grid)


# ---------------------------------------------------------------------------
# oscillation measurements
# ---------------------------------------------------------------------------


def rescale_array(values: np.ndarray, grid: Grid, sigma: int) -> np.ndarray:
    """Samples of ``x -> f(sigma x)`` from samples of ``f`` (exact node re-indexing)."""
    if int(sigma) != sigma or sigma < 1:
        raise ValueError("sigma must be a positive integer")
    idx = (int(sigma) * np.arange(grid.n_x)) % grid.n_x
    return values[np.ix_(*([idx] * grid.d))]


def rescale(f: ScalarField, sigma: int) -> ScalarField:
    return ScalarField(f.grid, rescale_array(f.values, f.grid, sigma))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x`` (zeros clipped to the smallest float)."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.maximum(np.abs(np.asarray(ys, dtype=float)), np.finfo(float).tiny))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class OscillationProbe:
    """A slow factor ``a``, a fast profile ``f`` and the oscillation frequencies to test."""

    a: ScalarField
    f: ScalarField
    sigmas: tuple[int, ...]

    def __post_init__(self):
        s = [int(x) for x in self.sigmas]
        if any(x < 1 for x in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("sigmas must be strictly increasing positive integers")
        self.sigmas = tuple(s)
        if self.a.grid != self.f.grid:
            raise ValueError("a and f must share a grid")


@dataclass
class DecayResult:
    sigmas: tuple[int, ...]
    values: tuple[float, ...]
    slope: float
    bound_shape: tuple[float, ...] = ()


def _check_resolved(probe: OscillationProbe, fraction: float = 1 - 1e-12) -> None:
    grid = probe.f.grid
    band = energy_bandwidth(probe.f.values, grid, fraction)
    if probe.sigmas[-1] * band >= grid.n_x // 2:
        raise ValueError(
            f"sigma = {probe.sigmas[-1]} with bandwidth {band} is not resolved on n_x = {grid.n_x}"
        )


def improved_holder_gap(probe: OscillationProbe, r: float) -> DecayResult:
    """``| ||a f(sigma .)||_r - ||a||_r ||f||_r |`` for each sigma and its log-log slope."""
    if not (r >= 1 and r != math.inf):
        raise ValueError("r must lie in [1, inf)")
    _check_resolved(probe)
    grid = probe.a.grid
    a, f = probe.a.values, probe.f.values
    ref = lp_norm_array(a, r) * lp_norm_array(f, r)
    gaps = []
    for sigma in probe.sigmas:
        fs = rescale_array(f, grid, sigma)
        gaps.append(abs(lp_norm_array(a * fs, r) - ref))
    return DecayResult(probe.sigmas, tuple(gaps), loglog_slope(probe.sigmas, gaps))


def mean_decay(probe: OscillationProbe, n: int) -> DecayResult:
    """``| mean(a(x) f(sigma x)) |`` per sigma, the fitted slope and the bound shape
    ``sigma^{-n} ||a||_{C^n} ||f||_2``."""
    if n < 0 or n % 2:
        raise ValueError("n must be an even integer >= 0")
    f = probe.f.values
    if abs(np.mean(f)) > 1e-12 * max(1.0, float(np.max(np.abs(f)))):
        raise ValueError("f must have zero mean")
    _check_resolved(probe)
    grid = probe.a.grid
    vals = [abs(float(np.mean(probe.a.values * rescale_array(f, grid, s)))) for s in probe.sigmas]
    cn = ck_norm(probe.a.values, grid, n)
    f2 = lp_norm_array(f, 2)
    shape = tuple(s ** (-n) * cn * f2 for s in probe.sigmas)
    return DecayResult(probe.sigmas, tuple(vals), loglog_slope(probe.sigmas, vals), shape)


def cz_ratio(f: VectorField, r: float) -> float:
    """``||R div f||_r / ||f||_r`` for ``r`` in ``[1, inf]``.

    The operator is bounded only for ``1 < r < inf``; at the endpoints the
    ratio is a measurement, not a checked bound.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    num = lp_norm_array(anti_divergence_array(divergence_array(f.values, f.grid), f.grid), r, vector=True)
    den = lp_norm_array(f.values, r, vector=True)
    return num / den if den else 0.0
