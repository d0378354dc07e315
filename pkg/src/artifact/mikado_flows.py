"""Stationary periodic Mikado densities, fields and potentials on T^d.

The cross-sectional profile is ``Omega = grad Psi / c`` with ``Psi`` a tensor
product of 1-D mollifier bumps, so ``phi = div Omega = Laplacian Psi / c`` is
compactly supported with zero mean and ``c`` makes ``int phi^2 = 1``.

Pipe ``j`` runs along ``e_j``.  It is shifted by ``1/(4d)`` along the next
axis (cyclically) and periodised.  All fields are evaluated in closed form at
the requested points, so supports are exact on any grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bumps import MarginBump
from .spectral_core import (
    TWO_PI,
    Grid,
    ScalarField,
    VectorField,
    derivative_array,
    divergence_array,
    energy_bandwidth,
)


@dataclass
class BumpProfile:
    """Cross-section ``Psi(z) = prod_i psi(z_i)`` on ``R^{d-1}`` with normalisation ``c``."""

    d: int
    margin: float = 0.125
    psi: MarginBump = field(init=False)
    norm_const: float = field(init=False)

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("Mikado flows need d >= 3")
        self.psi = MarginBump(self.margin)
        a0 = self.psi.integral(lambda y: self.psi(y) ** 2)
        a1 = self.psi.integral(lambda y: self.psi(y, 1) ** 2)
        a2 = self.psi.integral(lambda y: self.psi(y, 2) ** 2)
        k = self.d - 1
        c2 = k * a2 * a0 ** (k - 1) + k * (k - 1) * a1**2 * a0 ** (k - 2)
        self.norm_const = math.sqrt(c2)

    @property
    def support(self) -> tuple[float, float]:
        return self.margin, 1.0 - self.margin

    def _factors(self, z, orders):
        return {o: [self.psi(zi, o) for zi in z] for o in orders}

    def Psi(self, z):
        out = 1.0
        for zi in z:
            out = out * self.psi(zi)
        return out

    def Omega(self, z):
        """Components of ``grad Psi / c``; one array per cross-section axis."""
        f = self._factors(z, (0, 1))
        comps = []
        for i in range(len(z)):
            term = f[1][i]
            for k in range(len(z)):
                if k != i:
                    term = term * f[0][k]
            comps.append(term / self.norm_const)
        return comps

    def phi(self, z):
        f = self._factors(z, (0, 2))
        total = 0.0
        for i in range(len(z)):
            term = f[2][i]
            for k in range(len(z)):
                if k != i:
                    term = term * f[0][k]
            total = total + term
        return total / self.norm_const

    def grad_phi(self, z):
        f = self._factors(z, (0, 1, 2, 3))
        m = len(z)
        comps = []
        for i in range(m):
            term = f[3][i]
            for k in range(m):
                if k != i:
                    term = term * f[0][k]
            total = term
            for l in range(m):
                if l == i:
                    continue
                term = f[1][i] * f[2][l]
                for k in range(m):
                    if k not in (i, l):
                        term = term * f[0][k]
                total = total + term
            comps.append(total / self.norm_const)
        return comps

    def bandwidth(self, n: int = 256) -> int:
        """99.9%-energy bandwidth of ``phi`` sampled on the unit cell (``mu = 1``)."""
        g = Grid(d=2, n_x=n, n_t=4)
        z = [g.coord(0), g.coord(1)]
        vals = self.phi(z[: self.d - 1] if self.d - 1 <= 2 else z + [np.full((1, 1), 0.5)] * (self.d - 3))
        return energy_bandwidth(np.broadcast_to(vals, g.shape).copy(), g)


def build_bump(d: int, margin: float = 0.125) -> BumpProfile:
    return BumpProfile(d=d, margin=margin)


class MikadoFamily:
    """The ``d`` stationary triples ``(Phi_j, W_j, Omega_j)`` at concentration ``mu``.

    Axes are 0-based: pipe ``j`` is parallel to axis ``j`` and shifted by
    ``1/(4d)`` along axis ``(j + 1) % d``.  Arrays are produced on demand for
    any integer oscillation ``sigma`` (the field evaluated at ``sigma * x``).
    """

    def __init__(self, bump: BumpProfile, mu: float, p: float, grid: Grid, check: bool = True):
        d = grid.d
        if bump.d != d:
            raise ValueError("bump and grid dimensions differ")
        if mu < 8 * d:
            raise ValueError(f"mu must be >= 8d = {8 * d}, got {mu}")
        if p <= 1:
            raise ValueError("p must exceed 1")
        self.bump, self.mu, self.p, self.grid = bump, float(mu), float(p), grid
        self.d = d
        self.p_prime = p / (p - 1.0)
        self.amp_phi = self.mu ** ((d - 1) / p)
        self.amp_w = self.mu ** ((d - 1) / self.p_prime)
        self.amp_omega = self.mu ** (-1.0 + (d - 1) / p)
        if check:
            require_representable(grid, mu, 1)
            overlaps = support_overlaps(self, 1)
            if any(v for v in overlaps.values()):
                raise RuntimeError(f"Mikado supports overlap: {overlaps}")

    # -- geometry -----------------------------------------------------------
    def perp_axes(self, j: int) -> list[int]:
        return [a for a in range(self.d) if a != j]

    def shift_axis(self, j: int) -> int:
        return (j + 1) % self.d

    def local_coords(self, j: int, coords):
        """Cross-section coordinates ``mu * frac(x_i - shift_i)`` for the axes orthogonal to ``j``."""
        out = []
        for a in self.perp_axes(j):
            shift = 1.0 / (4 * self.d) if a == self.shift_axis(j) else 0.0
            out.append(self.mu * np.mod(coords[a] - shift, 1.0))
        return out

    def grid_coords(self, sigma: int = 1):
        return [sigma * self.grid.coord(a) for a in range(self.d)]

    # -- closed-form evaluation ----------------------------------------------
    def phi_at(self, j: int, coords):
        return self.amp_phi * self.bump.phi(self.local_coords(j, coords))

    def w_at(self, j: int, coords):
        """The ``j``-th (only nonzero) component of ``W_j``."""
        return self.amp_w * self.bump.phi(self.local_coords(j, coords))

    def omega_at(self, j: int, coords):
        comps = self.bump.Omega(self.local_coords(j, coords))
        out = [None] * self.d
        for a, c in zip(self.perp_axes(j), comps):
            out[a] = self.amp_omega * c
        return out

    def grad_phi_at(self, j: int, coords, sigma: int = 1):
        """Analytic gradient of ``x -> Phi_j(sigma x)``; the ``j`` component is zero."""
        comps = self.bump.grad_phi(self.local_coords(j, coords))
        out = [0.0] * self.d
        for a, c in zip(self.perp_axes(j), comps):
            out[a] = sigma * self.mu * self.amp_phi * c
        return out

    def _full(self, arr):
        return np.broadcast_to(arr, self.grid.shape).copy()

    def phi(self, j: int, sigma: int = 1) -> np.ndarray:
        return self._full(self.phi_at(j, self.grid_coords(sigma)))

    def w_scalar(self, j: int, sigma: int = 1) -> np.ndarray:
        return self._full(self.w_at(j, self.grid_coords(sigma)))

    def W(self, j: int, sigma: int = 1) -> np.ndarray:
        out = np.zeros((self.d,) + self.grid.shape)
        out[j] = self.w_scalar(j, sigma)
        return out

    def omega(self, j: int, sigma: int = 1) -> np.ndarray:
        comps = self.omega_at(j, self.grid_coords(sigma))
        out = np.zeros((self.d,) + self.grid.shape)
        for a, c in enumerate(comps):
            if c is not None:
                out[a] = c / sigma
        return out

    def grad_w(self, j: int, sigma: int = 1) -> np.ndarray:
        """``grad`` of the nonzero component of ``W_j(sigma x)`` (analytic)."""
        comps = self.grad_phi_at(j, self.grid_coords(sigma), sigma)
        ratio = self.amp_w / self.amp_phi
        return np.stack([np.broadcast_to(ratio * c, self.grid.shape) for c in comps])

    def support_mask(self, j: int, sigma: int = 1) -> np.ndarray:
        lo, hi = self.bump.support
        mask = True
        for z in self.local_coords(j, self.grid_coords(sigma)):
            mask = mask & (z > lo) & (z < hi)
        return np.broadcast_to(mask, self.grid.shape)

    def support_box(self, j: int):
        """Per-axis physical interval containing one copy of the support of pipe ``j``."""
        lo, hi = self.bump.support
        box = {}
        for a in self.perp_axes(j):
            shift = 1.0 / (4 * self.d) if a == self.shift_axis(j) else 0.0
            box[a] = (shift + lo / self.mu, shift + hi / self.mu)
        return box

    # -- field wrappers -----------------------------------------------------
    def Phi_field(self, j: int, sigma: int = 1) -> ScalarField:
        return ScalarField(self.grid, self.phi(j, sigma))

    def W_field(self, j: int, sigma: int = 1) -> VectorField:
        return VectorField(self.grid, self.W(j, sigma))

    def Omega_field(self, j: int, sigma: int = 1) -> VectorField:
        return VectorField(self.grid, self.omega(j, sigma))


def representable(grid: Grid, mu: float, sigma: int) -> bool:
    """At least ``4 * sigma * mu`` nodes per axis: each pipe cross-section spans several nodes."""
    return grid.n_x >= 4 * sigma * mu


def require_representable(grid: Grid, mu: float, sigma: int) -> None:
    if not representable(grid, mu, sigma):
        raise ResolutionError(
            f"n_x = {grid.n_x} cannot represent sigma*mu = {sigma}*{mu}: need n_x >= {4 * sigma * mu:g}"
        )


class ResolutionError(ValueError):
    """The grid is too coarse for the requested concentration/oscillation."""


def resolution_ok(grid: Grid, mu: float, sigma: int, bandwidth: int) -> bool:
    """Strict aliasing criterion ``n_x >= 4 sigma mu B`` with ``B`` the bump bandwidth."""
    return grid.n_x >= 4 * sigma * mu * bandwidth


def build_mikado_family(bump: BumpProfile, mu: float, p: float, grid: Grid) -> MikadoFamily:
    return MikadoFamily(bump, mu, p, grid)


def support_overlaps(family: MikadoFamily, sigma: int = 1) -> dict[tuple[int, int], int]:
    """Number of grid nodes shared by the supports of each pair of pipes."""
    masks = [family.support_mask(j, sigma) for j in range(family.d)]
    out = {}
    for j in range(family.d):
        for k in range(j + 1, family.d):
            out[(j, k)] = int(np.count_nonzero(masks[j] & masks[k]))
    return out


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def _fd6(fn, coords, axis, step):
    """Sixth-order central difference of a closed-form field along ``axis``."""
    coeffs = {1: 45.0, 2: -9.0, 3: 1.0}
    acc = 0.0
    for k, c in coeffs.items():
        plus = list(coords)
        minus = list(coords)
        plus[axis] = coords[axis] + k * step
        minus[axis] = coords[axis] - k * step
        acc = acc + c * (fn(plus) - fn(minus))
    return acc / (60.0 * step)


def box_quadrature(family: MikadoFamily, j: int, panels: int = 32, nodes: int = 16):
    """Tensor Gauss-Legendre points and weights covering one copy of pipe ``j``.

    Coordinates along ``j`` are irrelevant (the fields do not depend on them)
    and are set to zero.
    """
    xg, wg = leggauss(nodes)
    box = family.support_box(j)
    coords = [np.zeros((1,) * (family.d - 1)) for _ in range(family.d)]
    weight = 1.0
    perp = family.perp_axes(j)
    for slot, a in enumerate(perp):
        lo, hi = box[a]
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        pts = (mid[:, None] + half[:, None] * xg).ravel()
        wts = (half[:, None] * wg).ravel()
        shape = [1] * (family.d - 1)
        shape[slot] = pts.size
        coords[a] = pts.reshape(shape)
        weight = weight * wts.reshape(shape)
    return coords, weight


def quadrature_norm(values, weight, r: float) -> float:
    if r == math.inf:
        return float(np.max(np.abs(values)))
    return float(np.sum(weight * np.abs(values) ** r) ** (1.0 / r))


def scaling_norms(family: MikadoFamily, q: float, j: int = 0) -> dict[str, float]:
    """Norms used for the concentration scaling law, by quadrature of the closed form."""
    coords, weight = box_quadrature(family, j)
    phi = family.phi_at(j, coords)
    grad_w = family.grad_phi_at(j, coords)
    ratio = family.amp_w / family.amp_phi
    gw = np.sqrt(sum(np.asarray(c) ** 2 for c in grad_w)) * ratio
    return {
        "phi_L1": quadrature_norm(phi, weight, 1),
        "phi_L2": quadrature_norm(phi, weight, 2),
        "phi_Lp": quadrature_norm(phi, weight, family.p),
        "grad_w_Lq": quadrature_norm(gw, weight, q),
    }


def scaling_exponents(d: int, p: float, q: float) -> dict[str, float]:
    """Exponent of ``mu`` in ``||grad^m F||_{L^r}`` for the norms of :func:`scaling_norms`."""
    pp = p / (p - 1.0)
    return {
        "phi_L1": (d - 1) / p - (d - 1) / 1.0,
        "phi_L2": (d - 1) / p - (d - 1) / 2.0,
        "phi_Lp": 0.0,
        "grad_w_Lq": 1.0 + (d - 1) / pp - (d - 1) / q,
    }


def grid_scaling_norms(family: MikadoFamily, q: float, j: int = 0) -> dict[str, float]:
    """Same norms from grid samples (rectangle rule); a resolution diagnostic."""
    phi = family.phi(j)
    gw = np.sqrt(np.sum(family.grad_w(j) ** 2, axis=0))
    return {
        "phi_L1": float(np.mean(np.abs(phi))),
        "phi_L2": float(np.sqrt(np.mean(phi**2))),
        "phi_Lp": float(np.mean(np.abs(phi) ** family.p) ** (1 / family.p)),
        "grad_w_Lq": float(np.mean(gw**q) ** (1 / q)),
    }


@dataclass
class MikadoReport:
    """Verification results; ``rows`` holds ``(check, j, value, tolerance, passed, hard)``."""

    mu: float
    rows: list = field(default_factory=list)

    def add(self, check, j, value, tol, hard=True):
        self.rows.append((check, j, float(value), tol, bool(value <= tol) if tol is not None else True, hard))

    @property
    def passed(self) -> bool:
        return all(ok for _, _, _, _, ok, hard in self.rows if hard)

    def value(self, check, j=None):
        vals = [v for c, jj, v, *_ in self.rows if c == check and (j is None or jj == j)]
        return max(vals) if vals else None


def verify_mikado(family: MikadoFamily, others=(), q: float = 1.0, tol: float = 1e-6) -> MikadoReport:
    """Check stationarity, the potential identity, moments and disjointness.

    Hard identities are evaluated pointwise at grid nodes from the closed form
    (derivatives by sixth-order differences of the closed-form fields, which is
    independent of the analytic derivative code) and integrals by tensor
    Gauss-Legendre quadrature.  Spectral residuals on the grid are reported as
    soft rows: they measure aliasing, not the construction.
    """
    grid = family.grid
    d = family.d
    rep = MikadoReport(mu=family.mu)
    coords = family.grid_coords(1)
    step = 1e-3 / family.mu
    for j in range(d):
        phi = family.phi(j)
        wj = family.w_scalar(j)
        om = family.omega(j)
        phi_inf = float(np.max(np.abs(phi)))
        w_inf = float(np.max(np.abs(wj)))

        div_om = 0.0
        for a in family.perp_axes(j):
            div_om = div_om + _fd6(lambda c, a=a: family.omega_at(j, c)[a], coords, a, step)
        rep.add("potential_nodal", j, np.max(np.abs(div_om - phi)) / phi_inf, tol)
        stat = _fd6(lambda c: family.phi_at(j, c) * family.w_at(j, c), coords, j, step)
        rep.add("stationarity_nodal", j, np.max(np.abs(stat)) / (phi_inf * w_inf * TWO_PI * family.mu), tol)
        divw = _fd6(lambda c: family.w_at(j, c), coords, j, step)
        rep.add("div_W_nodal", j, np.max(np.abs(divw)) / (w_inf * TWO_PI * family.mu), tol)

        spec_div_w = derivative_array(wj, grid, j)
        rep.add("div_W_spectral", j, np.max(np.abs(spec_div_w)) / w_inf, 1e-8)
        spec_stat = derivative_array(phi * wj, grid, j)
        rep.add("stationarity_spectral", j, np.max(np.abs(spec_stat)) / (phi_inf * w_inf * TWO_PI * family.mu), tol)
        spec_pot = divergence_array(om, grid) - phi
        rep.add("potential_spectral", j, np.max(np.abs(spec_pot)) / phi_inf, None, hard=False)
        rep.add("along_axis_derivative", j, np.max(np.abs(derivative_array(phi, grid, j))), 1e-10)
        ratio = family.amp_w / family.amp_phi
        rep.add("W_proportional_to_Phi", j, np.max(np.abs(wj - ratio * phi)) / w_inf, 1e-12)

        qc, qw = box_quadrature(family, j)
        prod = family.phi_at(j, qc) * family.w_at(j, qc)
        rep.add("moment_quadrature", j, abs(np.sum(qw * prod) - 1.0), tol)
        rep.add("mean_quadrature", j, abs(np.sum(qw * family.phi_at(j, qc))) / phi_inf, 1e-10)
        rep.add("moment_grid", j, abs(np.mean(phi * wj) - 1.0), None, hard=False)
        rep.add("mean_grid", j, abs(np.mean(phi)) / phi_inf, None, hard=False)

    for (j, k), count in support_overlaps(family).items():
        rep.add("support_overlap_nodes", (j, k), count, 0)
        cross = np.max(np.abs(family.phi(j) * family.w_scalar(k)))
        rep.add("cross_product_max", (j, k), cross, 0.0)

    base = scaling_norms(family, q)
    expo = scaling_exponents(d, family.p, q)
    for other in others:
        cmp = scaling_norms(other, q)
        factor = other.mu / family.mu
        for key in ("phi_L1", "phi_L2", "grad_w_Lq"):
            expected = factor ** expo[key]
            rel = abs(cmp[key] / base[key] / expected - 1.0)
            rep.add(f"scaling_{key}_mu{other.mu:g}", 0, rel, 0.10)
        gbase, gcmp = grid_scaling_norms(family, q), grid_scaling_norms(other, q)
        for key in ("phi_L1", "phi_L2", "grad_w_Lq"):
            rel = abs(gcmp[key] / gbase[key] / factor ** expo[key] - 1.0)
            rep.add(f"grid_scaling_{key}_mu{other.mu:g}", 0, rel, None, hard=False)
    return rep
