import json
import math

import numpy as np
import pytest

from artifact import spectral_core as sc
from artifact.convex_step import (
    TERMS,
    ConfigError,
    ROut,
    RhoOut,
    SolutionTriple,
    StepParams,
    UOut,
    _prepare,
    convergence_order,
    perform_step,
    residual_slice,
    schedule_params,
    validate_exponents,
    weak_pairing,
)
from artifact.iteration_driver import initial_triple
from artifact.mikado_flows import ResolutionError
from oracle import div

GRID = sc.Grid(3, 128, 16)
TIMES = (0.05, 0.3, 0.56)
DELTA = 0.2 * (2 / np.pi) ** 2


@pytest.fixture(scope="module")
def triple():
    x = np.broadcast_to(np.cos(2 * np.pi * GRID.coord(0)), GRID.shape)
    return initial_triple(sc.SeparableField(GRID, [(sc.Harmonic(1, -np.pi / 2), x)]))


@pytest.fixture(scope="module")
def state(triple):
    cfg = validate_exponents(2, 1, 2, 1, 3)
    return _prepare(triple, StepParams(24.0, 4.0, 1, 2, 1.0, DELTA), cfg.p, cfg.s, 16, False)


def test_exponent_validation():
    cfg = validate_exponents(2, 1, 2, 1, 3)
    assert math.isclose(cfg.beta, 1 / 12) and math.isclose(cfg.alpha, 7 / 6)
    assert cfg.p_prime == 2 and cfg.s_prime == 2
    with pytest.raises(ConfigError, match="p > 1"):
        validate_exponents(1.0, 1, 2, 1)
    with pytest.raises(ConfigError, match="s_tilde"):
        validate_exponents(2, 1, 2, 2)
    with pytest.raises(ConfigError):
        validate_exponents(2, 1, 2, 1, d=2)
    with pytest.raises(ConfigError, match="neither"):
        validate_exponents(4, 8, 4, 1.2)


def test_schedule_values():
    cfg = validate_exponents(2, 1, 2, 1, 3)
    par = schedule_params(cfg, 64.0, 1.0, 1.0)
    # kappa = mu^{alpha s' s~ / (s' - s~)} = 64^{7/3}
    assert math.isclose(par.kappa, 64.0 ** (7 / 3), rel_tol=1e-12)
    assert (par.sigma, par.lam) == (1, 1)
    par = schedule_params(cfg, 4096.0, 1.0, 1.0)
    assert (par.sigma, par.lam) == (2, 1)
    par = schedule_params(cfg, 2.0**20, 1.0, 1.0, mode="assum-2", eps=0.1)
    assert (par.sigma, par.lam) == (4, 2)
    with pytest.raises(ConfigError):
        schedule_params(cfg, 8.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        schedule_params(cfg, 64.0, 1.0, 1.0, mode="other")


def test_step_params_validation():
    with pytest.raises(ConfigError):
        StepParams(24.0, 0.5, 1, 1, 1.0, 1.0)
    with pytest.raises(ConfigError):
        StepParams(24.0, 4.0, 0, 1, 1.0, 1.0)
    with pytest.raises(ConfigError):
        StepParams(24.0, 4.0, 1, 1, -1.0, 1.0)


def test_perturbations_are_mean_free_and_divergence_free(state):
    for t in TIMES:
        sl = state.evaluate(t)
        if sl.theta is not None:
            assert abs(sl.theta.mean()) < 1e-12 * max(1.0, np.max(np.abs(sl.theta)))
        if sl.w is not None:
            assert np.max(np.abs(div(sl.w))) < 1e-9 * np.max(np.abs(sl.w))


def test_defect_terms_sum_to_output(state):
    out = ROut(state)
    for t in TIMES:
        sl = state.evaluate(t)
        parts = [v for v in sl.terms.values() if v is not None]
        assert set(sl.terms) <= set(TERMS)
        assert np.max(np.abs(out.at(t) - sum(parts))) < 1e-12


def test_output_solves_continuity_defect_equation(triple, state):
    # only the fourth-order time differences of R leave a residual
    out = SolutionTriple(RhoOut(state), UOut(state), ROut(state))
    for t in TIMES:
        res = residual_slice(out.rho, out.u, out.R, t)
        assert np.max(np.abs(res)) < 1e-3 * np.max(np.abs(out.rho.dt(t)))


def test_theta_vanishes_outside_time_cutoff(triple, state):
    r = state.params.r
    for t in (0.0, r / 4, 1 - r / 4):
        assert np.array_equal(RhoOut(state).at(t), triple.rho.at(t))
        assert not np.any(UOut(state).at(t))


def test_residual_converges_with_time_step(triple):
    cfg = validate_exponents(2, 1, 2, 1, 3)
    res = {}
    for n_t in (16, 32):
        st = _prepare(triple, StepParams(24.0, 4.0, 1, 2, 1.0, DELTA), cfg.p, cfg.s, n_t, False)
        out = SolutionTriple(RhoOut(st), UOut(st), ROut(st))
        res[n_t] = sum(np.mean(np.abs(residual_slice(out.rho, out.u, out.R, t))) for t in TIMES)
    assert convergence_order(res[16], res[32]) >= 3.5


def test_zero_defect_gives_identity_step():
    g = sc.Grid(3, 128, 8)
    rho = sc.SeparableField(g, [(sc.Constant(1.0), np.ones(g.shape))])
    tri = initial_triple(rho)
    cfg = validate_exponents(2, 1, 2, 1, 3)
    res = perform_step(tri, cfg, StepParams(24.0, 4.0, 1, 1, 1.0, 0.1))
    assert res.report.degenerate and res.report.passed
    assert res.triple.rho is tri.rho


def test_unrepresentable_mu_raises(triple):
    cfg = validate_exponents(2, 1, 2, 1, 3)
    with pytest.raises(ResolutionError):
        perform_step(triple, cfg, StepParams(48.0, 4.0, 1, 1, 1.0, DELTA))


def test_convergence_order_and_weak_pairing():
    assert math.isclose(convergence_order(16.0, 1.0), 4.0)
    assert convergence_order(1.0, 0.0) == math.inf
    g = sc.Grid(2, 16, 4)
    x = np.broadcast_to(g.coord(0), g.shape)
    theta = sc.SeparableField(g, [(sc.Constant(), np.cos(2 * np.pi * 2 * x))])
    phi = np.cos(2 * np.pi * 2 * x)
    # |mean(theta phi)| / ||phi||_{C^1} = (1/2) / (4 pi)
    assert math.isclose(weak_pairing(theta, phi, 1), 0.5 / (4 * np.pi), rel_tol=1e-10)


def test_report_serialisation(triple):
    cfg = validate_exponents(2, 1, 2, 1, 3)
    g = sc.Grid(3, 128, 4)
    x = np.broadcast_to(np.cos(2 * np.pi * g.coord(0)), g.shape)
    tri = initial_triple(sc.SeparableField(g, [(sc.Harmonic(1, -np.pi / 2), x)]))
    res = perform_step(tri, cfg, StepParams(24.0, 4.0, 1, 1, 1.0, 0.2))
    data = json.loads(res.report.to_json())
    assert data["passed"] == res.report.passed
    assert res.report.to_csv().splitlines()[0] == "name,value,shape,ratio"
    assert set(data["term_l1"]) == set(TERMS)
