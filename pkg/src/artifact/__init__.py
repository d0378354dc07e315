"""Convex-integration construction of weak solutions to the transport equation on the torus.

Modules
-------
spectral_core            grids, spectral calculus, fields, norms, time quadrature
antidiv_ops              anti-divergence and bilinear anti-divergence
mikado_flows             stationary Mikado densities and fields
temporal_intermittency   time-concentrated profiles
defect_coeffs            cutoffs and amplitude coefficients from a defect field
convex_step              one perturbation step and its measurements
iteration_driver         iteration schedule, run ledger, norm-profile witness
cli_io                   command line, configuration and output
"""

__version__ = "0.1.0"
