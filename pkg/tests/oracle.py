"""Reference implementations written directly against numpy.fft, independent of the package."""

import numpy as np


def wavenumbers(n, d):
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0  # drop the Nyquist mode from odd derivatives
    out = []
    for a in range(d):
        shape = [1] * d
        shape[a] = n
        out.append(k.reshape(shape))
    return out


def deriv(f, axis):
    n, d = f.shape[0], f.ndim
    k = wavenumbers(n, d)[axis]
    return np.real(np.fft.ifftn(2j * np.pi * k * np.fft.fftn(f)))


def div(v):
    return sum(deriv(v[a], a) for a in range(v.shape[0]))


def bandlimited(rng, n, d, kmax):
    """Real trigonometric polynomial with random coefficients on modes |k_a| < kmax."""
    spec = np.zeros((n,) * d, dtype=complex)
    ks = np.arange(-kmax + 1, kmax)
    idx = np.ix_(*([ks % n] * d))
    spec[idx] = rng.normal(size=(ks.size,) * d) + 1j * rng.normal(size=(ks.size,) * d)
    return np.real(np.fft.ifftn(spec)) * n**d


def coords(n, d):
    x = np.arange(n) / n
    return np.meshgrid(*([x] * d), indexing="ij")
