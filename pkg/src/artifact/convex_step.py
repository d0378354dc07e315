"""One convex-integration step for the continuity-defect equation
``d_t rho + div(rho u) = div R``.

The output triple is lazy: ``rho + theta``, ``u + w`` and the new defect are
assembled slice by slice from the Mikado building blocks, the temporal
profiles and the coefficient fields.  Spatial calculus is spectral; the only
numerical time derivative is the fourth-order difference of the incoming
defect ``R`` inside the chain rule for ``d_t a_j`` and ``d_t(chi_j^2 R_j)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .antidiv_ops import BilinearAccumulator, anti_divergence_array
from .defect_coeffs import CoefficientSet, build_coefficients, build_cutoffs, choose_r
from .mikado_flows import MikadoFamily, ResolutionError, build_bump, representable
from .spectral_core import (
    Grid,
    ScalarField,
    SpaceTimeField,
    ZeroField,
    ck_norm,
    combine_time,
    corner_projection,
    derivative_array,
    divergence_array,
    fd4,
    gradient_array,
    lp_norm_array,
    merge_intervals,
    sobolev_array,
    time_quadrature,
)
from .temporal_intermittency import TemporalProfiles, conjugate, inv


class ConfigError(ValueError):
    """Exponents or parameters outside the admissible range."""


# ---------------------------------------------------------------------------
# exponents and parameter schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentConfig:
    p: float
    q: float
    s: float
    s_tilde: float
    d: int = 3

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def s_prime(self) -> float:
        return conjugate(self.s)

    @property
    def beta(self) -> float:
        return (self.p - 1.0) * (self.d - 1) / (4.0 * self.p * (self.p + 1.0))

    @property
    def alpha(self) -> float:
        return 1.0 + (self.p - 1.0) * (self.d - 1) / (2.0 * (self.p + 1.0) * self.p)

    def kappa_exponent(self, alpha: float | None = None) -> float:
        a = self.alpha if alpha is None else alpha
        if self.s_prime == math.inf:
            return a * self.s_tilde
        return a * self.s_prime * self.s_tilde / (self.s_prime - self.s_tilde)

    @property
    def N(self) -> int:
        return int(math.ceil(self.kappa_exponent() / (self.beta * self.s) + self.d / self.beta))

    @property
    def valid_assum(self) -> bool:
        first = 1.0 / self.p + 1.0 / self.q > 1.0 - (self.p - 1.0) / (4.0 * (self.p + 1.0) * self.p)
        b = self.beta
        second = self.s_tilde <= self.s / (self.s * inv(self.s_prime) + (1 + 2 * b) / (1 + 4 * b))
        return bool(first and second)

    @property
    def valid_assum2(self) -> bool:
        return self.s_tilde == 1.0 and self.q < math.inf

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(p_prime=self.p_prime, s_prime=self.s_prime, alpha=self.alpha, beta=self.beta,
                   N=self.N, valid_assum=self.valid_assum, valid_assum2=self.valid_assum2)
        return out


def validate_exponents(p, q, s, s_tilde, d=3) -> ExponentConfig:
    """Build an :class:`ExponentConfig` or raise :class:`ConfigError` naming the violated condition."""
    if not p > 1:
        raise ConfigError("p > 1 required (the step needs a finite dual exponent p')")
    for name, v in (("q", q), ("s", s), ("s_tilde", s_tilde)):
        if not (1 <= v < math.inf):
            raise ConfigError(f"{name} must lie in [1, inf), got {v}")
    if int(d) != d or d < 3:
        raise ConfigError(f"d must be an integer >= 3, got {d}")
    cfg = ExponentConfig(float(p), float(q), float(s), float(s_tilde), int(d))
    if s_tilde >= cfg.s_prime:
        raise ConfigError(
            f"s_tilde = {s_tilde} >= s' = {cfg.s_prime}: the kappa exponent s's~/(s'-s~) is undefined; "
            "use manual parameters or the s_tilde = 1 variant"
        )
    if not (cfg.valid_assum or cfg.valid_assum2):
        lhs = 1.0 / p + 1.0 / q
        rhs = 1.0 - (p - 1.0) / (4.0 * (p + 1.0) * p)
        raise ConfigError(
            f"neither admissibility condition holds: need 1/p + 1/q = {lhs:.6g} > {rhs:.6g} and "
            f"s_tilde <= s/(s/s' + (1+2b)/(1+4b)), or s_tilde = 1"
        )
    return cfg


@dataclass
class StepParams:
    mu: float
    kappa: float
    sigma: int
    lam: int
    nu: float
    delta: float
    r: float | None = None
    mode: str = "manual"
    kappa_check: bool | None = None

    def __post_init__(self):
        if self.sigma < 1 or self.lam < 1:
            raise ConfigError(f"sigma and lambda must be >= 1 (got {self.sigma}, {self.lam})")
        if self.kappa < 1:
            raise ConfigError(f"kappa must be >= 1, got {self.kappa}")
        if self.nu <= 0 or self.delta <= 0:
            raise ConfigError("nu and delta must be positive")

    @property
    def scheduled(self) -> bool:
        return self.mode != "manual"

    def to_dict(self) -> dict:
        return asdict(self)


def schedule_params(config: ExponentConfig, mu: float, nu: float, delta: float,
                    mode: str = "assum", eps: float = 0.05) -> StepParams:
    """Scheduled ``(kappa, sigma, lambda)`` from ``mu``.

    ``mode="assum"``: ``kappa = mu^{alpha s' s~/(s'-s~)}``, ``sigma = floor(mu^beta)``,
    ``lambda = floor(mu^{beta/2})``.  ``mode="assum-2"``: ``beta = (p-1)(d-1)/p - 2 eps``,
    ``alpha = 1 + 2 beta``, ``sigma = floor(mu^eps)``, ``lambda = floor(mu^{eps/2})``.
    """
    if mu < 8 * config.d:
        raise ConfigError(f"mu must be >= 8d = {8 * config.d}")
    if mode == "assum":
        beta, alpha = config.beta, config.alpha
        sig_exp, lam_exp = beta, beta / 2
    elif mode == "assum-2":
        if not config.valid_assum2:
            raise ConfigError("the s_tilde = 1 schedule needs s_tilde = 1")
        beta = (config.p - 1.0) * (config.d - 1) / config.p - 2.0 * eps
        if beta <= 0:
            raise ConfigError(f"eps = {eps} too large: beta = {beta} <= 0")
        alpha = 1.0 + 2.0 * beta
        sig_exp, lam_exp = eps, eps / 2
    else:
        raise ConfigError(f"unknown scheduler mode {mode!r}")
    kappa = mu ** config.kappa_exponent(alpha)
    # guard against 4096**(1/12) = 1.9999999999999998
    sigma = int(math.floor(mu**sig_exp * (1 + 1e-12)))
    lam = int(math.floor(mu**lam_exp * (1 + 1e-12)))
    if sigma < 1 or lam < 1:
        raise ConfigError(f"mu = {mu} gives sigma = {sigma}, lambda = {lam}")
    check = kappa ** (1.0 / config.s) <= mu ** (1 + 4 * beta) * (1 + 1e-12)
    return StepParams(mu, kappa, sigma, lam, nu, delta, None, mode, bool(check))


# ---------------------------------------------------------------------------
# triples
# ---------------------------------------------------------------------------


@dataclass
class SolutionTriple:
    rho: SpaceTimeField
    u: SpaceTimeField
    R: SpaceTimeField
    index: int = 1

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def special_intervals(self):
        return merge_intervals(self.rho.special_intervals() + self.u.special_intervals() + self.R.special_intervals())


class CachedField(SpaceTimeField):
    """LRU cache in front of an expensive field (stencil reuse for finite differences)."""

    def __init__(self, inner: SpaceTimeField, size: int = 8):
        super().__init__(inner.grid, inner.kind, inner.name)
        self.inner, self.size = inner, size
        self._cache: OrderedDict = OrderedDict()

    def at(self, t):
        key = round(float(t), 13)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        val = self.inner.at(t)
        self._cache[key] = val
        if len(self._cache) > self.size:
            self._cache.popitem(last=False)
        return val

    def dt(self, t, scheme="exact"):
        if scheme == "exact":
            return self.inner.dt(t, "exact")
        return super().dt(t, scheme)

    def special_intervals(self):
        return self.inner.special_intervals()

    def is_zero(self):
        return self.inner.is_zero()


def _add(*xs):
    out = None
    for x in xs:
        if x is not None:
            out = x.copy() if out is None else out + x
    return out


def _mul(a, b):
    """Scalar field ``a`` times vector field ``b`` (either may be ``None``)."""
    if a is None or b is None:
        return None
    return a[None] * b


@dataclass
class StepSlice:
    theta_p: np.ndarray | None = None
    theta_c: np.ndarray | None = None
    theta_o: np.ndarray | None = None
    w_p: np.ndarray | None = None
    w_c: np.ndarray | None = None
    terms: dict = field(default_factory=dict)

    @property
    def theta(self):
        return _add(self.theta_p, self.theta_c, self.theta_o)

    @property
    def w(self):
        return _add(self.w_p, self.w_c)


TERMS = ("R_lin", "R_cor", "R_tem", "R_osc_x", "R_osc_t", "R_rem")


class StepState:
    """Everything one step needs to evaluate its perturbations and new defect at any ``t``."""

    def __init__(self, triple: SolutionTriple, coeffs: CoefficientSet, mikado: MikadoFamily,
                 profiles: TemporalProfiles, params: StepParams, fd_step: float, cache: int = 2):
        self.triple, self.coeffs, self.mikado, self.profiles, self.params = triple, coeffs, mikado, profiles, params
        self.grid = triple.grid
        self.d = self.grid.d
        self.fd_step = fd_step
        self.R = triple.R
        sigma = params.sigma
        g = self.grid
        self.Phi, self.RPhi, self.Wsc, self.RW, self.F, self.RF = [], [], [], [], [], []
        for j in range(self.d):
            phi = mikado.phi(j, sigma)
            w = mikado.w_scalar(j, sigma)
            F = phi * w - 1.0
            self.Phi.append(phi)
            self.Wsc.append(w)
            self.F.append(F)
            self.RPhi.append(anti_divergence_array(phi, g))
            self.RW.append(anti_divergence_array(w, g))
            self.RF.append(anti_divergence_array(F, g))
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache

    # -- time factors -------------------------------------------------------
    def gt(self, t, order=0):
        lam = self.params.lam
        return lam**order * float(self.profiles.g_tilde(lam * t, order))

    def gb(self, t, order=0):
        lam = self.params.lam
        return lam**order * float(self.profiles.g_bar(lam * t, order))

    def h(self, t, order=0):
        """``lambda^{-1} h(lambda t)`` and its time derivatives."""
        lam = self.params.lam
        return lam ** (order - 1) * float(self.profiles.h(lam * t, order))

    def intervals(self):
        out = list(self.coeffs.cutoffs.intervals())
        out += self.profiles.fast_windows(self.params.lam)
        out += self.triple.special_intervals()
        return merge_intervals(out)

    # -- evaluation -----------------------------------------------------------
    def coefficient_slice(self, t, exact=False):
        Rt = self.R.at(t)
        if not self.coeffs.cutoffs.active(t):
            return Rt, None
        dRt = self.R.dt(t, "exact") if exact else fd4(self.R.at, t, self.fd_step)
        return Rt, self.coeffs.evaluate(t, Rt, dRt)

    def _div_chi2R(self, sl):
        out = []
        for j in range(self.d):
            c = sl.chi2R[j]
            out.append(None if c is None else derivative_array(c, self.grid, j))
        return out

    def evaluate(self, t) -> StepSlice:
        key = round(float(t), 13)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        res = self._evaluate(t)
        self._cache[key] = res
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return res

    def _evaluate(self, t) -> StepSlice:
        g, d = self.grid, self.d
        Rt, sl = self.coefficient_slice(t)
        out = StepSlice()
        rho_t = self.triple.rho.at(t)
        u_t = None if self.triple.u.is_zero() else self.triple.u.at(t)
        active = sl is not None and any(c is not None for c in sl.chi)
        if not active:
            out.terms = {k: None for k in TERMS}
            out.terms["R_rem"] = Rt
            return out
        gt, dgt = self.gt(t), self.gt(t, 1)
        gb = self.gb(t)
        hl = self.h(t)
        live = [j for j in range(d) if sl.chi[j] is not None]

        if gt != 0.0:
            out.theta_p = gt * sum(sl.a[j] * self.Phi[j] for j in live)
            out.theta_c = -corner_projection(out.theta_p, g)
        dchi = self._div_chi2R(sl)
        div_sum = _add(*dchi)
        if hl != 0.0 and div_sum is not None:
            out.theta_o = hl * div_sum
        if gb != 0.0:
            w_p = np.zeros((d,) + g.shape)
            acc = BilinearAccumulator(g)
            for j in live:
                w_p[j] = gb * sl.b[j] * self.Wsc[j]
                acc.add(derivative_array(sl.b[j], g, j), self.Wsc[j], self.RW[j])
            out.w_p = w_p
            out.w_c = -gb * acc.result()

        theta, w = out.theta, out.w
        terms = {}
        terms["R_lin"] = _add(_mul(theta, u_t), _mul(rho_t, w))
        terms["R_cor"] = _add(_mul(theta, out.w_c), _mul(_add(out.theta_o, out.theta_c), out.w_p))
        if gt != 0.0 or dgt != 0.0:
            acc = BilinearAccumulator(g)
            for j in live:
                acc.add(dgt * sl.a[j] + gt * sl.da[j], self.Phi[j], self.RPhi[j])
            terms["R_tem"] = acc.result()
        else:
            terms["R_tem"] = None
        ggb = gt * gb
        if ggb != 0.0:
            acc = BilinearAccumulator(g)
            for j in live:
                acc.add(-dchi[j], self.F[j], self.RF[j])
            terms["R_osc_x"] = ggb * acc.result()
        else:
            terms["R_osc_x"] = None
        if hl != 0.0:
            osc = np.zeros((d,) + g.shape)
            for j in live:
                osc[j] = hl * sl.dchi2R[j]
            terms["R_osc_t"] = osc
        else:
            terms["R_osc_t"] = None
        rem = Rt.copy()
        for j in live:
            rem[j] = rem[j] - sl.chi2R[j]
        terms["R_rem"] = rem
        out.terms = terms
        return out

    def theta_dt(self, t):
        """Exact ``d_t theta`` using the incoming field's own time derivative."""
        Rt, sl = self.coefficient_slice(t, exact=True)
        if sl is None or all(c is None for c in sl.chi):
            return None
        g, live = self.grid, [j for j in range(self.d) if sl.chi[j] is not None]
        gt, dgt = self.gt(t), self.gt(t, 1)
        out = None
        if gt != 0.0 or dgt != 0.0:
            dtp = sum((dgt * sl.a[j] + gt * sl.da[j]) * self.Phi[j] for j in live)
            out = dtp - corner_projection(dtp, g)
        hl, dhl = self.h(t), self.h(t, 1)
        if hl != 0.0 or dhl != 0.0:
            d0 = _add(*[derivative_array(sl.chi2R[j], g, j) for j in live])
            d1 = _add(*[derivative_array(sl.dchi2R[j], g, j) for j in live])
            out = _add(out, dhl * d0, hl * d1)
        return out


class _StepOutput(SpaceTimeField):
    def __init__(self, state: StepState, kind: str, name: str):
        super().__init__(state.grid, kind, name)
        self.state = state

    def special_intervals(self):
        return self.state.intervals()


class RhoOut(_StepOutput):
    def __init__(self, state):
        super().__init__(state, "scalar", "rho")

    def at(self, t):
        base = self.state.triple.rho.at(t)
        theta = self.state.evaluate(t).theta
        return base if theta is None else base + theta

    def dt(self, t, scheme="exact"):
        if scheme != "exact":
            return super().dt(t, scheme)
        base = self.state.triple.rho.dt(t, "exact")
        extra = self.state.theta_dt(t)
        return base if extra is None else base + extra


class UOut(_StepOutput):
    def __init__(self, state):
        super().__init__(state, "vector", "u")

    def at(self, t):
        base = self.state.triple.u.at(t)
        w = self.state.evaluate(t).w
        return base if w is None else base + w

    def is_zero(self):
        return False


class ROut(_StepOutput):
    def __init__(self, state):
        super().__init__(state, "vector", "R")

    def at(self, t):
        terms = self.state.evaluate(t).terms
        return _add(*terms.values())


# ---------------------------------------------------------------------------
# construction entry points
# ---------------------------------------------------------------------------


@dataclass
class StepParts:
    """Lazy views of the individual perturbations and defect terms."""

    state: StepState

    def part(self, name: str) -> SpaceTimeField:
        kind = "scalar" if name.startswith("theta") else "vector"
        state = self.state

        class _Part(_StepOutput):
            def at(self, t):
                sl = state.evaluate(t)
                val = sl.terms.get(name) if name in TERMS else getattr(sl, name)
                return np.zeros(self.value_shape) if val is None else val

        return _Part(state, kind, name)


def _prepare(triple: SolutionTriple, params: StepParams, p: float, s: float, n_t: int | None, mollify: bool):
    grid = triple.grid
    if not representable(grid, params.mu, params.sigma):
        raise ResolutionError(
            f"n_x = {grid.n_x} cannot represent sigma*mu = {params.sigma}*{params.mu:g}"
        )
    n_t = n_t or grid.n_t
    R = triple.R if isinstance(triple.R, CachedField) else CachedField(triple.R)
    triple = SolutionTriple(triple.rho, triple.u, R, triple.index)
    r = params.r if params.r is not None else choose_r(R, params.delta, grid.d)
    params.r = r
    cutoffs = build_cutoffs(R, params.delta, r)
    coeffs = build_coefficients(R, cutoffs, params.nu, p, s, mollify)
    mikado = MikadoFamily(build_bump(grid.d), params.mu, p, grid)
    profiles = TemporalProfiles(params.kappa, s)
    return StepState(triple, coeffs, mikado, profiles, params, 1.0 / n_t)


def build_perturbations(state: StepState):
    """``(theta, w, parts)`` as lazy fields."""
    parts = StepParts(state)
    return RhoMinus(state), WOnly(state), parts


class RhoMinus(_StepOutput):
    """``theta = theta_p + theta_c + theta_o``."""

    def __init__(self, state):
        super().__init__(state, "scalar", "theta")

    def at(self, t):
        th = self.state.evaluate(t).theta
        return np.zeros(self.value_shape) if th is None else th


class WOnly(_StepOutput):
    def __init__(self, state):
        super().__init__(state, "vector", "w")

    def at(self, t):
        w = self.state.evaluate(t).w
        return np.zeros(self.value_shape) if w is None else w


def build_defect(state: StepState):
    """``(R1, breakdown)`` with the six defect terms as lazy fields."""
    parts = StepParts(state)
    return ROut(state), {name: parts.part(name) for name in TERMS}


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------


def residual_slice(rho: SpaceTimeField, u: SpaceTimeField, R: SpaceTimeField, t: float, scheme="exact"):
    """``d_t rho + div(rho u) - div R`` at one time."""
    g = rho.grid
    rho_t = rho.at(t)
    out = rho.dt(t, scheme) - divergence_array(R.at(t), g)
    if not u.is_zero():
        out = out + divergence_array(rho_t[None] * u.at(t), g)
    return out


def defect_residual(triple: SolutionTriple, quadrature=None, scheme="exact") -> float:
    """``|| d_t rho + div(rho u) - div R ||_{L^1_{t,x}}``."""
    if quadrature is None:
        quadrature = time_quadrature(triple.grid.n_t, triple.special_intervals())
    nodes, weights = quadrature
    vals = [lp_norm_array(residual_slice(triple.rho, triple.u, triple.R, t, scheme), 1) for t in nodes]
    return combine_time(vals, weights, 1.0)


def convergence_order(res_coarse: float, res_fine: float) -> float:
    if res_fine <= 0 or res_coarse <= 0:
        return math.inf
    return math.log2(res_coarse / res_fine)


def weak_pairing(theta: SpaceTimeField, phi: ScalarField | np.ndarray, N: int, nodes=None) -> float:
    """``max_t |int theta(t) phi| / ||phi||_{C^N}``."""
    vals = phi.values if isinstance(phi, ScalarField) else np.asarray(phi)
    grid = theta.grid
    if nodes is None:
        nodes, _ = time_quadrature(grid.n_t, theta.special_intervals())
    best = max(abs(float(np.mean(theta.at(t) * vals))) for t in nodes)
    norm = ck_norm(vals, grid, N)
    return best / norm if norm else 0.0


@dataclass
class Measurement:
    name: str
    value: float
    shape: float
    ratio: float


@dataclass
class StepReport:
    params: dict
    exponents: dict
    measurements: list = field(default_factory=list)
    term_l1: dict = field(default_factory=dict)
    R_in_l1: float = 0.0
    R_out_l1: float = 0.0
    residual_in: float = 0.0
    residual_out: float = 0.0
    max_mean_theta: float = 0.0
    max_div_w_rel: float = 0.0
    max_div_u_rel: float = 0.0
    theta_outside_Ir: float = 0.0
    theta_outside_Ir2: float = 0.0
    theta_outside_Ir_any: float = 0.0
    M_theta: float = 0.0
    M_w: float = 0.0
    rho_dev: float = 0.0
    w_dual: float = 0.0
    w_sobolev: float = 0.0
    pass_R: bool = False
    pass_w: bool = False
    degenerate: bool = False
    mollified: bool = False
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.pass_R and self.pass_w

    def add(self, name, value, shape):
        ratio = value / shape if shape else 0.0
        self.measurements.append(Measurement(name, float(value), float(shape), float(ratio)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["name", "value", "shape", "ratio"])
        for m in self.measurements:
            w.writerow([m.name, repr(m.value), repr(m.shape), repr(m.ratio)])
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return str(x)


def _in_interval(t, lo, hi):
    tau = t % 1.0
    return lo - 1e-12 <= tau <= hi + 1e-12


def measure_step(state: StepState, config: ExponentConfig, triple1: SolutionTriple,
                 n_t: int | None = None) -> StepReport:
    """Single streaming pass over the time quadrature collecting every reported quantity."""
    p, s, q, st = config.p, config.s, config.q, config.s_tilde
    pp, sp = config.p_prime, config.s_prime
    params = state.params
    g = state.grid
    n_t = n_t or g.n_t
    nodes, weights = time_quadrature(n_t, state.intervals())
    grid_nodes = set(np.round(np.arange(n_t) / n_t, 13))
    r = params.r
    acc = {k: [] for k in ("theta_p", "theta_c", "theta_o", "theta", "w_p", "w_c", "w", "w_sob")}
    terms = {k: [] for k in TERMS}
    R_in, R_out, res_in, res_out = [], [], [], []
    rep = StepReport(params.to_dict(), config.to_dict(), mollified=state.coeffs.mollify)
    t0 = state.triple
    for t in nodes:
        sl = state.evaluate(t)
        for name in ("theta_p", "theta_c", "theta_o"):
            v = getattr(sl, name)
            acc[name].append(0.0 if v is None else lp_norm_array(v, p))
        theta = sl.theta
        acc["theta"].append(0.0 if theta is None else lp_norm_array(theta, p))
        for name in ("w_p", "w_c"):
            v = getattr(sl, name)
            acc[name].append(0.0 if v is None else lp_norm_array(v, pp, vector=True))
        w = sl.w
        acc["w"].append(0.0 if w is None else lp_norm_array(w, pp, vector=True))
        acc["w_sob"].append(0.0 if w is None else sobolev_array(w, g, q))
        for k in TERMS:
            v = sl.terms.get(k)
            terms[k].append(0.0 if v is None else lp_norm_array(v, 1, vector=True))
        R1 = _add(*sl.terms.values())
        R_out.append(lp_norm_array(R1, 1, vector=True))
        R_in.append(lp_norm_array(t0.R.at(t), 1, vector=True))
        res_in.append(lp_norm_array(residual_slice(t0.rho, t0.u, t0.R, t), 1))
        res_out.append(lp_norm_array(residual_slice(triple1.rho, triple1.u, triple1.R, t), 1))
        if theta is not None:
            scale = max(1.0, float(np.max(np.abs(theta))))
            rep.max_mean_theta = max(rep.max_mean_theta, abs(float(np.mean(theta))) / scale)
        if w is not None:
            dw = np.max(np.abs(divergence_array(w, g)))
            gw = np.max(np.abs(np.stack([gradient_array(w[k], g) for k in range(g.d)])))
            rep.max_div_w_rel = max(rep.max_div_w_rel, float(dw / gw) if gw else 0.0)
        if round(float(t), 13) in grid_nodes:
            u1 = triple1.u.at(t)
        else:
            u1 = None
        if u1 is not None and np.any(u1):
            du = np.max(np.abs(divergence_array(u1, g)))
            gu = np.max(np.abs(np.stack([gradient_array(u1[k], g) for k in range(g.d)])))
            rep.max_div_u_rel = max(rep.max_div_u_rel, float(du / (1.0 + gu)))
        mag = 0.0 if theta is None else float(np.max(np.abs(theta)))
        # all quadrature nodes, including Gauss nodes inside the cutoff ramps
        if not _in_interval(t, r, 1 - r):
            rep.theta_outside_Ir_any = max(rep.theta_outside_Ir_any, mag)
        if u1 is not None:
            if not _in_interval(t, r, 1 - r):
                rep.theta_outside_Ir = max(rep.theta_outside_Ir, mag)
            if not _in_interval(t, r / 2, 1 - r / 2):
                rep.theta_outside_Ir2 = max(rep.theta_outside_Ir2, mag)

    def L(vals, e):
        return combine_time(vals, weights, e)

    rep.R_in_l1 = L(R_in, 1)
    rep.R_out_l1 = L(R_out, 1)
    rep.residual_in = L(res_in, 1)
    rep.residual_out = L(res_out, 1)
    rep.term_l1 = {k: L(v, 1) for k, v in terms.items()}
    nu, delta = params.nu, params.delta
    Rp = rep.R_in_l1 ** (1.0 / p)
    Rpp = rep.R_in_l1 ** (1.0 / pp)
    rep.rho_dev = L(acc["theta"], s)
    rep.w_dual = L(acc["w"], sp)
    rep.w_sobolev = L(acc["w_sob"], st)
    rep.M_theta = rep.rho_dev / (nu * Rp) if Rp else 0.0
    rep.M_w = rep.w_dual / (Rpp / nu) if Rpp else 0.0
    rep.add("theta_p_LsLp", L(acc["theta_p"], s), nu * Rp)
    rep.add("theta_c_LsLp", L(acc["theta_c"], s), nu / params.sigma)
    rep.add("theta_o_LsLp", L(acc["theta_o"], s), 1.0 / params.lam)
    rep.add("theta_LsLp", rep.rho_dev, nu * Rp)
    rep.add("w_p_Ls'Lp'", L(acc["w_p"], sp), Rpp / nu)
    rep.add("w_c_Ls'Lp'", L(acc["w_c"], sp), 1.0 / (nu * params.sigma))
    rep.add("w_Ls'Lp'", rep.w_dual, Rpp / nu)
    rep.add("w_Ls~W1q", rep.w_sobolev, delta)
    for k in TERMS:
        shape = delta / 2 if k == "R_rem" else delta
        rep.add(f"{k}_L1", rep.term_l1[k], shape)
    rep.add("R1_L1", rep.R_out_l1, delta)
    rep.add("term_budget_gap", sum(rep.term_l1.values()) - rep.R_out_l1, delta)
    rep.add("residual_out", rep.residual_out, max(rep.residual_in, 1e-300))
    rep.pass_R = rep.R_out_l1 <= delta
    rep.pass_w = rep.w_sobolev <= delta
    return rep


@dataclass
class StepResult:
    triple: SolutionTriple
    report: StepReport
    state: StepState | None
    theta: SpaceTimeField | None = None
    w: SpaceTimeField | None = None
    terms: dict | None = None


def perform_step(triple: SolutionTriple, config: ExponentConfig, params: StepParams,
                 n_t: int | None = None, mollify: bool = False, measure: bool = True) -> StepResult:
    """Apply one step: ``(rho, u, R) -> (rho + theta, u + w, R1)`` plus its :class:`StepReport`.

    ``n_t`` overrides the time resolution used for the finite differences of
    ``R``, the space-time norms of the cutoff weights and the report quadrature.
    """
    grid = triple.grid
    if triple.R.is_zero():
        rep = StepReport(params.to_dict(), config.to_dict(), degenerate=True, pass_R=True, pass_w=True)
        return StepResult(SolutionTriple(triple.rho, triple.u, triple.R, triple.index + 1), rep, None)
    state = _prepare(triple, params, config.p, config.s, n_t, mollify)
    out = SolutionTriple(RhoOut(state), UOut(state), ROut(state), triple.index + 1)
    theta, w, _ = build_perturbations(state)
    _, terms = build_defect(state)
    if measure:
        rep = measure_step(state, config, out, n_t or grid.n_t)
    else:
        rep = StepReport(params.to_dict(), config.to_dict())
    if state.coeffs.degenerate:
        rep.degenerate = True
        rep.notes.append("all cutoffs vanish: the step only relabels the defect")
    return StepResult(out, rep, state, theta, w, terms)
