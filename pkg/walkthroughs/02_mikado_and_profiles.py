"""Stationary Mikado triples and the intermittent time profiles.

Builds the family at mu = 24 on a 128^3 grid, runs its identity checks and
prints the L^r scaling against the predicted powers of mu.  Then checks the
normalisation of the time profiles.  About 10 seconds.
"""

import numpy as np

from artifact import mikado_flows as mk
from artifact import spectral_core as sc
from artifact import temporal_intermittency as ti

grid = sc.Grid(3, 128, 4)
p, q = 2.0, 1.0
bump = mk.build_bump(3)
fam = mk.build_mikado_family(bump, 24.0, p, grid)
rep = mk.verify_mikado(fam, q=q)
print(f"mu = {fam.mu:g}, hard checks passed: {rep.passed}")
for check, j, value, tol, ok, hard in rep.rows:
    if j in (0, None):
        print(f"  {check:28s} {value:10.3e}  {'hard' if hard else 'soft'}")

print("\nquadrature norms at mu=24 and predicted exponents in mu")
norms = mk.scaling_norms(fam, q)
expo = mk.scaling_exponents(3, p, q)
for key in norms:
    print(f"  {key:12s} {norms[key]:10.4f}   mu^{expo.get(key, float('nan')):+.3f}")

print("\ntime profiles")
for kappa in (4.0, 64.0, 1024.0):
    prof = ti.build_profiles(kappa, 2.0)
    t = np.linspace(0, 1, 20001)
    print(f"  kappa={kappa:6g}  int g_bar g_tilde = {ti.profile_product_integral(prof):.12f}"
          f"  max|h| = {np.max(np.abs(ti.eval_h(prof, t))):.4f}")
