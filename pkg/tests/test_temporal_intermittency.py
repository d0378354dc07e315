import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from artifact import bumps
from artifact.temporal_intermittency import (
    BaseBump,
    Composed,
    TemporalProfiles,
    conjugate,
    profile_norm,
    profile_product_integral,
)


def raw_bump(y, m=0.125):
    z = (y - m) / (1 - 2 * m)
    return math.exp(-1.0 / (z * (1 - z))) if 0 < z < 1 else 0.0


def test_base_bump_has_unit_l2_mass():
    g = BaseBump()
    mass = quad(lambda y: raw_bump(y) ** 2, 0.125, 0.875, epsabs=1e-15, epsrel=1e-13)[0]
    assert math.isclose(g.scale, 1 / math.sqrt(mass), rel_tol=1e-10)
    assert math.isclose(g.primitive(0.5), 0.5, abs_tol=1e-12)
    assert g.primitive(0.0) == 0.0 and g.primitive(1.0) == 1.0


def test_bump_derivatives_against_finite_differences():
    z = np.linspace(0.1, 0.9, 17)
    h = 1e-5
    for k in range(3):
        fd = (bumps.bump(z + h, k) - bumps.bump(z - h, k)) / (2 * h)
        assert np.allclose(bumps.bump(z, k + 1), fd, rtol=1e-6, atol=1e-8)


def test_smoothstep_limits():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    s = bumps.smoothstep(x)
    assert s[0] == 0 and s[1] == 0 and s[3] == 1 and s[4] == 1
    assert math.isclose(float(s[2]), 0.5, rel_tol=1e-14)


def test_conjugate():
    assert conjugate(2.0) == 2.0
    assert conjugate(1.0) == math.inf
    assert math.isclose(conjugate(3.0), 1.5)


@pytest.mark.parametrize("kappa", [4.0, 64.0, 1024.0])
def test_product_integral_against_adaptive_quadrature(kappa):
    prof = TemporalProfiles(kappa, 2.0)
    a, b = prof.support_window()
    ref = quad(lambda t: float(prof.g_bar(t) * prof.g_tilde(t)), a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    assert math.isclose(ref, 1.0, rel_tol=1e-10)
    assert math.isclose(profile_product_integral(prof), 1.0, rel_tol=1e-10)


def test_profile_scaling_laws():
    # ||g_kappa||_{L^r} = kappa^{-1/r} ||g||_{L^r}
    p4, p64 = TemporalProfiles(4.0, 2.0), TemporalProfiles(64.0, 2.0)
    for r in (1.0, 2.0, 3.0):
        ratio = profile_norm(p64, "g_kappa", 0, r) / profile_norm(p4, "g_kappa", 0, r)
        assert math.isclose(ratio, 16.0 ** (-1 / r), rel_tol=1e-9)
    ratio = profile_norm(p64, "g_kappa", 1, 2.0) / profile_norm(p4, "g_kappa", 1, 2.0)
    assert math.isclose(ratio, 16.0 ** (1 - 0.5), rel_tol=1e-9)
    assert math.isclose(profile_norm(p64, "g_tilde", 0, 2.0), 1.0, rel_tol=1e-9)


def test_h_derivatives():
    prof = TemporalProfiles(16.0, 3.0)
    t = np.linspace(0.001, 0.999, 41)
    h = 1e-7
    fd = (prof.h(t + h) - prof.h(t - h)) / (2 * h)
    assert np.allclose(prof.h(t, 1), fd, atol=1e-5)
    assert np.allclose(prof.h(t, 1), prof.g_bar(t) * prof.g_tilde(t) - 1, atol=1e-10)


def test_composed_chain_rule():
    prof = TemporalProfiles(8.0, 2.0)
    c = Composed(prof.g_tilde, lam=3.0, scale=2.0)
    t, h = 0.0123, 1e-7
    fd = (c(t + h) - c(t - h)) / (2 * h)
    assert math.isclose(c(t, 1), fd, rel_tol=1e-5)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        TemporalProfiles(0.5, 2.0)
    with pytest.raises(ValueError):
        TemporalProfiles(4.0, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 2000.0), st.floats(1.05, 10.0), st.floats(0.0, 1.0))
def test_h_bounded_and_periodic(kappa, s, t):
    prof = TemporalProfiles(kappa, s)
    assert abs(float(prof.h(t))) <= 1.0
    assert math.isclose(float(prof.g_tilde(t)), float(prof.g_tilde(t + 1.0)), rel_tol=1e-9, abs_tol=1e-12)
    assert float(prof.g_bar(t) * prof.g_tilde(t)) >= 0.0
