"""Battery of identity checks across all modules, run at a configurable scale.

Each row is ``(group, check, value, tol, passed, hard)``.  Rows with
``hard=False`` are measurements reported for information only.
"""

from __future__ import annotations

import csv
import io
import math
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import antidiv_ops as ad
from . import spectral_core as sc
from .convex_step import (
    SolutionTriple,
    StepParams,
    _prepare,
    RhoOut,
    ROut,
    UOut,
    residual_slice,
    schedule_params,
    validate_exponents,
)
from .defect_coeffs import build_coefficients, build_cutoffs, choose_r
from .iteration_driver import initial_triple, make_schedule
from .mikado_flows import MikadoFamily, build_bump, representable, verify_mikado
from .temporal_intermittency import TemporalProfiles, profile_product_integral

GROUPS = ("spectral", "antidiv", "temporal", "mikado", "coeffs", "schedule", "step")


@dataclass
class Row:
    group: str
    check: str
    value: float
    tol: float | None
    passed: bool
    hard: bool = True
    note: str = ""


@dataclass
class SuiteResult:
    rows: list = field(default_factory=list)
    resolution_failure: bool = False

    def add(self, group, check, value, tol, hard=True, note=""):
        value = float(value)
        ok = bool(np.isfinite(value) and value <= tol) if tol is not None else bool(np.isfinite(value))
        self.rows.append(Row(group, check, value, tol, ok, hard, note))

    def fail(self, group, check, note):
        self.rows.append(Row(group, check, math.nan, None, False, True, note))

    @property
    def hard_failures(self) -> list:
        return [r for r in self.rows if r.hard and not r.passed]

    def exit_code(self) -> int:
        if self.resolution_failure:
            return 3
        return 2 if self.hard_failures else 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["group", "check", "value", "tol", "passed", "hard", "note"])
        for r in self.rows:
            w.writerow([r.group, r.check, repr(r.value), "" if r.tol is None else r.tol, r.passed, r.hard, r.note])
        return buf.getvalue()


def _random_bandlimited(grid, rng, kmax=4):
    spec = np.zeros(grid.shape[:-1] + (grid.n_x // 2 + 1,), dtype=complex)
    idx = tuple(slice(0, kmax) for _ in range(grid.d))
    spec[idx] = rng.normal(size=spec[idx].shape) + 1j * rng.normal(size=spec[idx].shape)
    return sc.ifft(spec, grid) * grid.size


def _spectral(res, grid, rng):
    x = grid.coord(0)
    f = _random_bandlimited(grid, rng)
    res.add("spectral", "fft_roundtrip", np.max(np.abs(sc.ifft(sc.fft(f), grid) - f)) / np.max(np.abs(f)), 1e-12)
    s = np.broadcast_to(np.sin(2 * np.pi * x), grid.shape)
    c = np.broadcast_to(2 * np.pi * np.cos(2 * np.pi * x), grid.shape)
    res.add("spectral", "derivative_sine", np.max(np.abs(sc.derivative_array(s, grid, 0) - c)), 1e-10)
    res.add("spectral", "derivative_constant", np.max(np.abs(sc.derivative_array(np.full(grid.shape, 3.0), grid, 1))), 1e-14)
    lap = sum(sc.derivative_array(sc.derivative_array(f, grid, a), grid, a) for a in range(grid.d))
    dg = sc.divergence_array(sc.gradient_array(f, grid), grid)
    res.add("spectral", "div_grad_is_laplacian", np.max(np.abs(lap - dg)) / np.max(np.abs(lap)), 1e-12)
    pc = sc.corner_projection(f, grid)
    res.add("spectral", "corner_projection_idempotent", np.max(np.abs(sc.corner_projection(pc, grid) - pc)), 1e-12)
    res.add("spectral", "mean_of_derivative", abs(np.mean(sc.derivative_array(f, grid, 0))), 1e-12)
    res.add("spectral", "lp_norm_constant", abs(sc.lp_norm_array(np.full(grid.shape, -2.0), 3) - 2.0), 1e-14)
    res.add("spectral", "sobolev_constant", abs(sc.sobolev_array(np.full((grid.d,) + grid.shape, 0.5), grid, 2) - 0.5 * math.sqrt(grid.d)), 1e-14)
    nodes, w = sc.time_quadrature(grid.n_t, [(0.1, 0.1 + 1e-3)])
    res.add("spectral", "time_quadrature_mass", abs(np.sum(w) - 1.0), 1e-13)
    F = sc.SeparableField(grid, [(sc.Harmonic(1), s)])
    # ||cos(2 pi t)||_{L^2_t} * ||sin||_{L^2_x} = 1/2
    res.add("spectral", "mixed_norm_separable", abs(sc.mixed_norm(F, 2, 2) - 0.5), 1e-12)
    with tempfile.TemporaryDirectory() as tmp:
        sc.dump_field(f"{tmp}/f", f, grid, "scalar", "f")
        back, _ = sc.load_field(f"{tmp}/f")
    res.add("spectral", "dump_roundtrip", float(not np.array_equal(back, f)), 0.0)


def _antidiv(res, grid, rng, trials=5):
    worst_r = worst_b = worst_lit = 0.0
    for _ in range(trials):
        f = _random_bandlimited(grid, rng)
        a = _random_bandlimited(grid, rng, 3)
        divR = sc.divergence_array(ad.anti_divergence_array(f, grid), grid)
        worst_r = max(worst_r, np.max(np.abs(divR - (f - f.mean()))) / np.max(np.abs(f)))
        f0 = f - f.mean()
        B = ad.bilinear_array(a, f0, grid)
        af = a * f0
        worst_b = max(worst_b, np.max(np.abs(sc.divergence_array(B, grid) - (af - af.mean()))) / np.max(np.abs(af)))
        lit = ad.bilinear_array(a, f0, grid, form="literal")
        worst_lit = max(worst_lit, np.max(np.abs(lit - B)) / np.max(np.abs(B)))
    res.add("antidiv", "div_R_identity", worst_r, 1e-9)
    res.add("antidiv", "div_B_identity", worst_b, 1e-8)
    res.add("antidiv", "B_forms_agree_bandlimited", worst_lit, 1e-9)
    res.add("antidiv", "R_of_constant", np.max(np.abs(ad.anti_divergence_array(np.full(grid.shape, 4.0), grid))), 1e-14)
    f = _random_bandlimited(grid, rng, 3)
    Rf = ad.anti_divergence_array(f, grid)
    worst = 0.0
    for sigma in (2, 4):
        lhs = ad.anti_divergence_array(ad.rescale_array(f, grid, sigma), grid)
        rhs = np.stack([ad.rescale_array(c, grid, sigma) for c in Rf]) / sigma
        worst = max(worst, np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    res.add("antidiv", "rescaling_identity", worst, 1e-9)
    v = np.stack([_random_bandlimited(grid, rng, 3) for _ in range(grid.d)])
    res.add("antidiv", "cz_ratio_r2", ad.cz_ratio(sc.VectorField(grid, v), 2.0), 1.0 + 1e-9,
            note="R div is an orthogonal projection in L^2")
    for r, tag in ((1.0, "r1"), (np.inf, "rinf")):
        res.add("antidiv", f"cz_ratio_{tag}", ad.cz_ratio(sc.VectorField(grid, v), r), np.inf, hard=False,
                note="endpoint exponent, measured only")


def _temporal(res):
    for kappa in (4.0, 64.0, 1024.0):
        prof = TemporalProfiles(kappa, 2.0)
        res.add("temporal", f"gbar_gtilde_integral_k{kappa:g}", abs(profile_product_integral(prof) - 1.0), 1e-10)
    prof = TemporalProfiles(64.0, 2.0)
    ts = np.linspace(0, 1, 10001)
    res.add("temporal", "h_at_0", abs(float(prof.h(0.0))), 1e-14)
    res.add("temporal", "h_at_1", abs(float(prof.h(1.0 - 1e-15))), 1e-12)
    res.add("temporal", "h_at_half", abs(float(prof.h(0.5)) - 0.5), 1e-12)
    res.add("temporal", "h_sup_bound", float(np.max(np.abs(prof.h(ts)))), 1.0)
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 1, 100)
    res.add("temporal", "periodicity", float(np.max(np.abs(prof.g_tilde(t) - prof.g_tilde(t + 1)))), 1e-10)
    prod = prof.g_bar(ts) * prof.g_tilde(ts) - prof.kappa * prof.g_kappa(ts) ** 2
    res.add("temporal", "product_identity", float(np.max(np.abs(prod))) / prof.kappa, 1e-12)


def _mikado(res, grid, mu, p, q):
    if not representable(grid, mu, 1):
        res.resolution_failure = True
        res.fail("mikado", "resolution_guard", f"n_x = {grid.n_x} < 4*sigma*mu = {4 * mu:g}")
        return
    fam = MikadoFamily(build_bump(grid.d), mu, p, grid)
    rep = verify_mikado(fam, q=q)
    for check, j, value, tol, ok, hard in rep.rows:
        res.add("mikado", f"{check}[{j}]", value, tol, hard)


def _fixture(grid):
    x = grid.coord(0)
    rho = sc.SeparableField(grid, [(sc.Harmonic(1, -np.pi / 2), np.broadcast_to(np.cos(2 * np.pi * x), grid.shape))])
    return initial_triple(rho)


def _coeffs(res, grid):
    tri = _fixture(grid)
    R = tri.R
    delta = 0.2 * (2 / np.pi) ** 2
    r = choose_r(R, delta, grid.d)
    res.add("coeffs", "choose_r_rule", abs(r - min(0.25, delta / (8 * grid.d))), 1e-15)
    cut = build_cutoffs(R, delta, r)
    co = build_coefficients(R, cut, 1.0, 2.0, 1.5)
    worst_id = worst_a = worst_b = chi_range = chi_low = 0.0
    for t in (0.05, 0.3, 0.6, 0.9):
        Rt = R.at(t)
        sl = co.evaluate(t, Rt)
        a_bound, b_bound = co.norm_bounds(t, Rt)
        chi = cut.chi(t, Rt)
        chi_range = max(chi_range, float(np.max(chi - 1.0)), float(np.max(-chi)))
        chi_low = max(chi_low, float(np.max(np.where(np.abs(Rt) <= cut.lo, chi, 0.0))))
        for j in range(grid.d):
            if sl.a[j] is None:
                continue
            scale = float(np.max(np.abs(sl.chi2R[j]))) or 1.0
            worst_id = max(worst_id, float(np.max(np.abs(sl.a[j] * sl.b[j] + sl.chi2R[j]))) / scale)
            worst_a = max(worst_a, sc.lp_norm_array(sl.a[j], 2.0) / a_bound[j])
            worst_b = max(worst_b, sc.lp_norm_array(sl.b[j], 2.0) / b_bound[j])
    res.add("coeffs", "ab_identity", worst_id, 1e-9)
    res.add("coeffs", "a_norm_ratio", worst_a, 1 + 1e-6)
    res.add("coeffs", "b_norm_ratio", worst_b, 1 + 1e-6)
    res.add("coeffs", "chi_in_unit_interval", chi_range, 0.0)
    res.add("coeffs", "chi_zero_below_threshold", chi_low, 0.0)
    outside = max(float(np.max(cut.chi(t, R.at(t)))) for t in (0.0, r / 4, 1 - r / 4))
    res.add("coeffs", "chi_time_support", outside, 0.0)


def _schedule(res):
    cfg = validate_exponents(2, 1, 2, 1, 3)
    res.add("schedule", "beta_p2_d3", abs(cfg.beta - 1 / 12), 1e-15)
    res.add("schedule", "alpha_is_1_plus_2beta", abs(cfg.alpha - 1 - 2 * cfg.beta), 1e-15)
    par = schedule_params(cfg, 64.0, 1.0, 1.0)
    res.add("schedule", "kappa_mu64", abs(par.kappa / 16384.0 - 1.0), 1e-12)
    par = schedule_params(cfg, 4096.0, 1.0, 1.0)
    res.add("schedule", "sigma_lambda_mu4096", abs(par.sigma - 2) + abs(par.lam - 1), 0.0)
    for K in (4, 8):
        err = make_schedule(0.1, 2.0, 10.0, K).identity_errors()
        for key, v in err.items():
            res.add("schedule", f"{key}_K{K}", v, 1e-12)


def _step(res, grid, mu):
    if not representable(grid, mu, 1):
        res.resolution_failure = True
        res.fail("step", "resolution_guard", f"n_x = {grid.n_x} < 4*sigma*mu = {4 * mu:g}")
        return
    cfg = validate_exponents(2, 1, 2, 1, grid.d)
    tri = _fixture(grid)
    delta = 0.2 * (2 / np.pi) ** 2
    times = (0.05, 0.3, 0.56)
    resid = {}
    for n_t in (16, 32):
        st = _prepare(tri, StepParams(mu, 4.0, 1, 2, 1.0, delta), cfg.p, cfg.s, n_t, False)
        out = SolutionTriple(RhoOut(st), UOut(st), ROut(st))
        resid[n_t] = sum(float(np.mean(np.abs(residual_slice(out.rho, out.u, out.R, t)))) for t in times)
    order = math.log2(resid[16] / resid[32])
    res.add("step", "residual_order", 3.5 - order, 0.0, note=f"order {order:.3f}")
    worst_div = worst_mean = worst_budget = 0.0
    for t in times:
        sl = st.evaluate(t)
        w = sl.w
        if w is not None:
            gw = max(float(np.max(np.abs(sc.gradient_array(c, grid)))) for c in w)
            worst_div = max(worst_div, float(np.max(np.abs(sc.divergence_array(w, grid)))) / gw)
        th = sl.theta
        if th is not None:
            worst_mean = max(worst_mean, abs(float(np.mean(th))) / max(1.0, float(np.max(np.abs(th)))))
        tot = out.R.at(t)
        worst_budget = max(worst_budget, float(np.max(np.abs(tot - sum(v for v in sl.terms.values() if v is not None)))))
    res.add("step", "div_w", worst_div, 1e-8)
    res.add("step", "theta_mean", worst_mean, 1e-9)
    res.add("step", "defect_terms_sum", worst_budget, 1e-12)
    r = st.params.r
    res.add("step", "theta_outside_time_support", float(np.max(np.abs(out.rho.at(r / 4) - tri.rho.at(r / 4)))), 0.0)
    st2 = _prepare(tri, StepParams(mu, 4.0, 1, 2, 2.0, delta), cfg.p, cfg.s, 32, False)
    t = times[0]
    a, b = st.evaluate(t), st2.evaluate(t)
    cov = np.max(np.abs(b.theta_p - 2 * a.theta_p)) / np.max(np.abs(a.theta_p))
    cov = max(cov, np.max(np.abs(2 * b.w_p - a.w_p)) / np.max(np.abs(a.w_p)))
    res.add("step", "nu_scale_covariance", cov, 1e-12)


def run_verify_suite(n_x: int = 128, n_t: int = 16, d: int = 3, mu: float = 24.0, p: float = 2.0,
                     q: float = 1.0, only=None, seed: int = 0) -> SuiteResult:
    """Run the selected groups (all by default) and collect their rows."""
    groups = GROUPS if not only else tuple(only)
    unknown = set(groups) - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown groups {sorted(unknown)}; choose from {GROUPS}")
    res = SuiteResult()
    rng = np.random.default_rng(seed)
    small = sc.Grid(d, min(n_x, 32), max(n_t, 4))
    grid = sc.Grid(d, n_x, max(n_t, 4))
    if "spectral" in groups:
        _spectral(res, small, rng)
    if "antidiv" in groups:
        _antidiv(res, small, rng)
    if "temporal" in groups:
        _temporal(res)
    if "mikado" in groups:
        _mikado(res, grid, mu, p, q)
    if "coeffs" in groups:
        _coeffs(res, small)
    if "schedule" in groups:
        _schedule(res)
    if "step" in groups:
        _step(res, grid, mu)
    return res
