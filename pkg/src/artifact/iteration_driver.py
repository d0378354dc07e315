"""Repeated steps from an initial density, and the norm-profile witness built on top of it."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .antidiv_ops import anti_divergence_array
from .bumps import smoothstep
from .convex_step import (
    ConfigError,
    ExponentConfig,
    SolutionTriple,
    perform_step,
    schedule_params,
    validate_exponents,
)
from .mikado_flows import representable
from .spectral_core import (
    FunctionField,
    Grid,
    SeparableField,
    SpaceTimeField,
    ZeroField,
    combine_time,
    lp_norm_array,
    time_quadrature,
    window_quadrature,
)


class MeanDriftError(ValueError):
    """The initial density does not keep a constant spatial mean in time."""


def initial_triple(rho: SpaceTimeField, tol: float = 1e-10) -> SolutionTriple:
    """``(rho, 0, R(d_t rho))``.  Separable inputs keep an exact time derivative."""
    grid = rho.grid
    nodes, _ = time_quadrature(grid.n_t, rho.special_intervals())
    scale = max(1.0, max(float(np.max(np.abs(rho.at(t)))) for t in nodes[:: max(1, len(nodes) // 16)]))
    drift = max(abs(float(np.mean(rho.dt(t)))) for t in nodes)
    if drift > tol * scale:
        raise MeanDriftError(f"d/dt of the spatial mean reaches {drift:.3e}; the mean must be constant in time")
    if isinstance(rho, SeparableField):
        R = rho.time_derivative().map_spatial(lambda v: anti_divergence_array(v, grid), "vector")
        R.name = "R"
    else:
        R = FunctionField(grid, lambda t: anti_divergence_array(rho.dt(t), grid), "vector", "R",
                          intervals=rho.special_intervals())
    return SolutionTriple(rho, ZeroField(grid, "vector", "u"), R, 1)


@dataclass
class IterationSchedule:
    """``delta_n = c 4^{-n}`` (``2 <= n <= K``) with ``sum delta_n^{1/2} = 1`` and
    ``nu_n`` from ``delta_n^{1/p} nu_n = eps delta_n^{1/2} / (2 M)``."""

    eps: float
    p: float
    M_cfg: float
    K: int
    deltas: dict = field(default_factory=dict)
    nus: dict = field(default_factory=dict)
    mu_start: float = 24.0
    mu_factor: float = 2.0
    mu_cap: float | None = None

    def nu_first(self, R_l1: float) -> float:
        """``nu_1 = eps / (2 M ||R^1||^{1/p})``; infinite for a vanishing defect."""
        if R_l1 <= 0:
            return math.inf
        return self.eps / (2.0 * self.M_cfg * R_l1 ** (1.0 / self.p))

    def step_nu(self, n: int, R_l1: float) -> float:
        return self.nu_first(R_l1) if n == 1 else self.nus[n]

    def identity_errors(self) -> dict:
        pp = self.p / (self.p - 1.0)
        sqrt_sum = sum(math.sqrt(v) for v in self.deltas.values())
        rel = max(
            abs(self.deltas[n] ** (1 / self.p) * self.nus[n] - self.eps * math.sqrt(self.deltas[n]) / (2 * self.M_cfg))
            for n in self.deltas
        )
        dual = max(
            abs(self.deltas[n] ** (1 / pp) / self.nus[n] - 2 * self.M_cfg * math.sqrt(self.deltas[n]) / self.eps)
            for n in self.deltas
        )
        return {"sqrt_sum": abs(sqrt_sum - 1.0), "nu_relation": rel, "dual_relation": dual}


def make_schedule(eps: float, p: float, M_cfg: float = 10.0, K: int = 2, **mu_policy) -> IterationSchedule:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if K < 2:
        raise ValueError("K must be >= 2")
    if p <= 1:
        raise ValueError("p must exceed 1")
    ns = range(2, K + 1)
    c = 1.0 / sum(2.0 ** (-n) for n in ns) ** 2
    deltas = {n: c * 4.0 ** (-n) for n in ns}
    nus = {n: eps * math.sqrt(d) / (2.0 * M_cfg * d ** (1.0 / p)) for n, d in deltas.items()}
    return IterationSchedule(eps, p, M_cfg, K, deltas, nus, **mu_policy)


@dataclass
class LedgerEntry:
    n: int
    mu: float
    kappa: float
    sigma: int
    lam: int
    r: float
    nu: float
    delta: float
    n_x: int
    n_t: int
    attempts: int
    R_in_l1: float
    R_out_l1: float
    rho_dev: float
    w_dual: float
    w_sobolev: float
    residual_in: float
    residual_out: float
    pass_R: bool
    pass_w: bool
    max_div_u_rel: float
    max_mean_theta: float


@dataclass
class RunLedger:
    eps: float
    entries: list = field(default_factory=list)
    halted: bool = False
    halt_reason: str = ""
    degenerate: bool = False

    @property
    def deviation(self) -> float:
        return float(sum(e.rho_dev for e in self.entries))

    @property
    def deviation_ok(self) -> bool:
        return self.deviation <= self.eps

    def monotone_defect(self) -> bool:
        return all(e.R_out_l1 <= e.R_in_l1 for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps, "halted": self.halted, "halt_reason": self.halt_reason,
            "degenerate": self.degenerate, "deviation": self.deviation, "deviation_ok": self.deviation_ok,
            "monotone_defect": self.monotone_defect(), "entries": [asdict(e) for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.entries:
            names = list(asdict(self.entries[0]))
            w = csv.writer(buf)
            w.writerow(names)
            for e in self.entries:
                w.writerow([getattr(e, k) for k in names])
        return buf.getvalue()


@dataclass
class RunResult:
    triple: SolutionTriple
    ledger: RunLedger
    triples: list
    reports: list


def run_iterations(rho: SpaceTimeField, config: ExponentConfig, schedule: IterationSchedule,
                   mode: str = "assum", eps_mode: float = 0.05, mollify: bool = False,
                   keep_iterates: bool = False, log=None) -> RunResult:
    """Run ``K - 1`` steps starting from ``initial_triple(rho)``.

    Step ``n`` uses ``nu_n`` and ``delta_{n+1}``.  ``mu`` starts at
    ``schedule.mu_start`` and grows by ``mu_factor`` until the step reports
    ``||R^{n+1}||_{L^1} <= delta`` and ``||w||_{L^{s~} W^{1,q}} <= delta``.  When
    the grid can no longer represent the next ``mu`` the run halts, keeps the
    last computed step and flags the ledger.
    """
    triple = initial_triple(rho)
    grid = rho.grid
    ledger = RunLedger(schedule.eps)
    nodes, weights = time_quadrature(grid.n_t, triple.special_intervals())
    R1 = combine_time([lp_norm_array(triple.R.at(t), 1, vector=True) for t in nodes], weights, 1.0)
    triples, reports = [triple], []
    if R1 == 0.0:
        ledger.degenerate = True
        return RunResult(triple, ledger, triples, reports)
    R_l1 = R1
    for n in range(1, schedule.K):
        nu = schedule.step_nu(n, R_l1)
        delta = schedule.deltas[n + 1]
        mu = schedule.mu_start
        last, attempts = None, 0
        while True:
            params = schedule_params(config, mu, nu, delta, mode, eps_mode)
            cap = schedule.mu_cap is not None and mu > schedule.mu_cap
            if cap or not representable(grid, mu, params.sigma):
                ledger.halted = True
                ledger.halt_reason = (
                    f"resolution cap at step {n}: n_x = {grid.n_x} cannot represent sigma*mu = "
                    f"{params.sigma}*{mu:g}"
                )
                break
            attempts += 1
            res = perform_step(triple, config, params, mollify=mollify)
            last = (res, params)
            if log:
                log(f"step {n} mu={mu:g}: R1={res.report.R_out_l1:.4g} (delta {delta:.4g}) "
                    f"w={res.report.w_sobolev:.4g} pass={res.report.passed}")
            if res.report.passed:
                break
            mu *= schedule.mu_factor
        if last is None:
            break
        res, params = last
        rep = res.report
        ledger.entries.append(LedgerEntry(
            n, params.mu, params.kappa, params.sigma, params.lam, params.r or 0.0, nu, delta,
            grid.n_x, grid.n_t, attempts, rep.R_in_l1, rep.R_out_l1, rep.rho_dev, rep.w_dual,
            rep.w_sobolev, rep.residual_in, rep.residual_out, rep.pass_R, rep.pass_w,
            rep.max_div_u_rel, rep.max_mean_theta,
        ))
        reports.append(rep)
        triple = res.triple
        if keep_iterates:
            triples.append(triple)
        else:
            triples[-1:] = [triple]
        R_l1 = rep.R_out_l1
        if ledger.halted:
            break
    return RunResult(triple, ledger, triples, reports)


# ---------------------------------------------------------------------------
# norm-profile witness
# ---------------------------------------------------------------------------


class WindowFactor:
    """``chi(t) = S((3/8 - |t - 1/2|) / (1/8))``: 1 on ``[1/4, 3/4]``, 0 outside ``[1/8, 7/8]``."""

    def __call__(self, t, order=0):
        tau = float(t) % 1.0
        z = (0.375 - abs(tau - 0.5)) * 8.0
        if order == 0:
            return float(smoothstep(z))
        if order == 1:
            return float(smoothstep(z, 1)) * 8.0 * (-math.copysign(1.0, tau - 0.5))
        if order == 2:
            return float(smoothstep(z, 2)) * 64.0
        raise ValueError("window derivatives are available up to order 2")


def unit_profile(grid: Grid, p: float) -> np.ndarray:
    """``c sin(2 pi x_1)`` scaled to unit (discrete) ``L^p`` norm."""
    base = np.broadcast_to(np.sin(2 * np.pi * grid.coord(0)), grid.shape)
    return np.ascontiguousarray(base / lp_norm_array(base, p))


@dataclass
class DemoReport:
    p: float
    s: float
    eps: float
    K: int
    times: list
    norms: list
    spread: float
    A: float
    B: float
    rho0_max: float
    rho1_max: float
    endpoints_exact: bool
    ledger: dict

    def to_dict(self):
        return asdict(self)


def demo_nonuniqueness(p: float, s: float, grid: Grid, K: int = 2, q: float = 1.0, s_tilde: float = 1.0,
                       M_cfg: float = 10.0, mode: str = "assum", log=None) -> DemoReport:
    """Run the scheme from ``chi(t) rho_bar(x)`` and report the ``L^p`` profile of the result.

    ``A = int_{1/4}^{3/4} ||rho - rho_tilde||_p`` and
    ``B = int_{[0,1/8] u [7/8,1]} ||rho||_p``; ``K = 1`` skips the iteration.
    """
    if p <= 1:
        raise ConfigError("p > 1 required")
    config = validate_exponents(p, q, s, s_tilde, grid.d)
    rho_bar = unit_profile(grid, p)
    rho_t = SeparableField(grid, [(WindowFactor(), rho_bar)], "scalar", "rho_tilde")
    eps = 0.25 * 0.25 ** (1.0 / s)
    if K >= 2:
        run = run_iterations(rho_t, config, make_schedule(eps, p, M_cfg, K), mode=mode, log=log)
        rho, ledger = run.triple.rho, run.ledger.to_dict()
    else:
        rho, ledger = rho_t, {}
    intervals = rho.special_intervals()
    times = list(grid.t)
    norms = [lp_norm_array(rho.at(t), p) for t in times]
    qa = window_quadrature(0.25, 0.75, grid.n_t, intervals)
    A = combine_time([lp_norm_array(rho.at(t) - rho_t.at(t), p) for t in qa[0]], qa[1], 1.0)
    B = 0.0
    for a, b in ((0.0, 0.125), (0.875, 1.0)):
        nb, wb = window_quadrature(a, b, grid.n_t, intervals)
        B += combine_time([lp_norm_array(rho.at(t), p) for t in nb], wb, 1.0)
    r0, r1 = rho.at(0.0), rho.at(1.0)
    exact = bool(np.array_equal(r0, rho_t.at(0.0)) and np.array_equal(r1, rho_t.at(1.0)))
    return DemoReport(p, s, eps, K, [float(t) for t in times], [float(v) for v in norms],
                      float(max(norms) - min(norms)), float(A), float(B),
                      float(np.max(np.abs(r0))), float(np.max(np.abs(r1))), exact, ledger)
