"""Spectral calculus on the torus: derivatives, anti-divergence and the bilinear form.

Run with ``python3 walkthroughs/01_spectral_identities.py``; takes a few seconds.
"""

import numpy as np

from artifact import antidiv_ops as ad
from artifact import spectral_core as sc

rng = np.random.default_rng(0)
grid = sc.Grid(3, 32, 4)
x = [np.broadcast_to(grid.coord(a), grid.shape) for a in range(3)]


def random_field(kmax=4):
    spec = np.zeros(grid.shape, complex)
    k = np.fft.fftfreq(grid.n_x, 1 / grid.n_x)
    K = np.meshgrid(k, k, k, indexing="ij")
    mask = np.max(np.abs(K), axis=0) <= kmax
    spec[mask] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    return np.fft.ifftn(spec).real * grid.size


# derivatives of a single mode are exact to roundoff
f = np.sin(2 * np.pi * 3 * x[0]) * np.cos(2 * np.pi * x[1])
df = sc.derivative_array(f, grid, 0)
print("d/dx0 error      ", np.max(np.abs(df - 6 * np.pi * np.cos(2 * np.pi * 3 * x[0]) * np.cos(2 * np.pi * x[1]))))

# R inverts the divergence up to the mean; kmax = 3 keeps f(4x) below Nyquist
f = random_field(3)
Rf = ad.anti_divergence_array(f, grid)
print("div R f - (f - mean f)", np.max(np.abs(sc.divergence_array(Rf, grid) - (f - f.mean()))))

# rescaling: R[f(s x)] = s^{-1} (Rf)(s x) for integer s
for s in (2, 4):
    lhs = ad.anti_divergence_array(ad.rescale_array(f, grid, s), grid)
    rhs = np.stack([ad.rescale_array(c, grid, s) for c in Rf]) / s
    print(f"rescaling s={s}      ", np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))

# B(a, f) has divergence a f minus its mean when f has zero mean
a = 1.0 + 0.3 * random_field(2) / np.max(np.abs(random_field(2)))
f = f - f.mean()
B = ad.bilinear_array(a, f, grid)
print("div B - (af - mean)  ", np.max(np.abs(sc.divergence_array(B, grid) - (a * f - (a * f).mean()))))

# mean of a(x) f(s x) decays with s when a is smooth and f has zero mean
g2 = sc.Grid(2, 256, 4)
y0 = np.broadcast_to(g2.coord(0), g2.shape)
y1 = np.broadcast_to(g2.coord(1), g2.shape)
probe = ad.OscillationProbe(sc.ScalarField(g2, np.exp(np.cos(2 * np.pi * y0) + np.sin(2 * np.pi * y1))),
                            sc.ScalarField(g2, np.cos(2 * np.pi * y0) + np.sin(2 * np.pi * y1)), (2, 4, 8, 16))
res = ad.mean_decay(probe, 2)
print("mean decay values    ", ["%.2e" % v for v in res.values], "slope %.1f" % res.slope)
