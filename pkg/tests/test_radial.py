import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from moser_trudinger import bubble
from moser_trudinger.errors import NumericalAbort
from moser_trudinger.radial import (
    compare_expansion,
    lambda_from_scaling,
    mu_from_scaling,
    r_delta,
    shoot_bubble,
)


def test_mu_examples():
    assert abs(mu_from_scaling(4.0, 1.0) - math.exp(-0.5)) < 1e-15
    assert abs(mu_from_scaling(0.01, 2.0) ** 2 - 100 / math.e**4) < 1e-12
    assert abs(mu_from_scaling(0.01, 2.0) - 1.35335) < 1e-5


def test_mu_decreasing_in_gamma():
    g = np.linspace(0.5, 20, 50)
    mus = [mu_from_scaling(1e-3, x) for x in g]
    assert np.all(np.diff(mus) < 0)


def test_mu_log_space_large_gamma():
    assert mu_from_scaling(1.0, 30.0) > 0


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-8, 1e3), st.floats(0.1, 25.0))
def test_scaling_roundtrip(Lam, gamma):
    mu = mu_from_scaling(Lam, gamma)
    assert abs(lambda_from_scaling(mu, gamma) / Lam - 1) < 1e-12


def test_r_delta_examples():
    g = 2.0
    delta = math.log(2) / g**2
    assert abs(r_delta(g, 0.7, delta) - 0.7) < 1e-14
    r = r_delta(6.0, 1.3, 0.5)
    assert abs((r / 1.3) ** 2 / math.exp(18) - 1) < 1e-7
    ds = np.linspace(0.05, 0.95, 10)
    assert np.all(np.diff([r_delta(4.0, 1.0, d) for d in ds]) > 0)
    with pytest.raises(ValueError):
        r_delta(4.0, 1.0, 1.0)


def _shot(gamma, A=0.0, mu=1.0, delta=0.5):
    Lam = lambda_from_scaling(mu, gamma)
    return shoot_bubble(gamma, A, Lam, 2 * r_delta(gamma, mu, delta))


def test_profile_invariants():
    p = _shot(4.0)
    assert p.B[0] == 4.0 and p.dB[0] == 0.0
    pos = p.B > 0
    assert np.all(np.diff(p.B[pos]) < 0)
    assert p.stopped in ("zero-crossing", "r_max")


def _radau_oracle(gamma, A, Lam, r0, r1, y0):
    def rhs(r, y):
        b, db = y
        return [db, -db / r - b * (A + Lam * math.exp(b * b))]

    return solve_ivp(rhs, (r0, r1), y0, method="Radau", rtol=1e-12, atol=1e-14, dense_output=True)


def _three_term(gamma, A, Lam, r):
    e = A + Lam * math.exp(gamma**2)
    c = gamma * e / 4
    # r^4 coefficient from matching 16 d = c (A + Lam e^{g^2} (1 + 2 g^2))
    d = c * (A + Lam * math.exp(gamma**2) * (1 + 2 * gamma**2)) / 16
    return gamma - c * r * r + d * r**4, -2 * c * r + 4 * d * r**3


def test_series_start_is_fourth_order():
    gamma, A = 3.0, 0.01
    Lam = lambda_from_scaling(1.0, gamma)
    p = shoot_bubble(gamma, A, Lam, 5.0)
    r = np.linspace(0.02, 0.99, 20) * 0.1 * p.mu
    c = gamma * (A + Lam * math.exp(gamma**2)) / 4
    # below the start radius the profile is the 2-term series itself
    assert np.max(np.abs(p.at(r) - (gamma - c * r * r))) < 1e-15
    # against an accurate solution the 2-term start errs at fourth order
    r0 = 1e-4
    sol = _radau_oracle(gamma, A, Lam, r0, 0.1, list(_three_term(gamma, A, Lam, r0)))
    rem = np.abs(sol.sol(r)[0] - (gamma - c * r * r))
    slope = np.polyfit(np.log(r), np.log(rem), 1)[0]
    assert 3.8 < slope < 4.2


def test_against_independent_integrator():
    # same 2-term start at 0.1 mu, independent stiff integrator in r itself
    gamma, A = 3.0, 0.01
    Lam = lambda_from_scaling(1.0, gamma)
    p = shoot_bubble(gamma, A, Lam, 20.0, tol=1e-12)
    r0 = p.r_start
    c = gamma * (A + Lam * math.exp(gamma**2)) / 4
    sol = _radau_oracle(gamma, A, Lam, r0, p.r_end, [gamma - c * r0**2, -2 * c * r0])
    r = np.linspace(0.5, p.r_end, 40)
    assert np.max(np.abs(sol.sol(r)[0] - p.at(r))) < 1e-8


def test_start_error_is_small():
    # the 2-term start at 0.1 mu versus a 3-term start at 1e-4: profiles agree to ~1e-4
    gamma = 3.0
    Lam = lambda_from_scaling(1.0, gamma)
    p = shoot_bubble(gamma, 0.0, Lam, 20.0, tol=1e-12)
    sol = _radau_oracle(gamma, 0.0, Lam, 1e-4, p.r_end, list(_three_term(gamma, 0.0, Lam, 1e-4)))
    r = np.linspace(0.5, p.r_end, 40)
    assert np.max(np.abs(sol.sol(r)[0] - p.at(r))) < 1e-3


def test_rescaled_profile_approaches_t0():
    s = np.linspace(0, 10, 101)
    errs = []
    for gamma in (3.0, 4.0, 5.0):
        p = _shot(gamma)
        errs.append(np.max(np.abs(gamma * (gamma - p.at(p.mu * s)) - bubble.t0(s))))
    assert errs[0] > errs[1] > errs[2]


def test_energy_to_r_half():
    gamma = 5.0
    p = _shot(gamma)
    rd = r_delta(gamma, p.mu, 0.5)
    assert abs(p.energy_at(rd) / (4 * math.pi) - 1) < 0.1


def test_energy_matches_quadrature():
    p = _shot(3.0)
    from scipy.integrate import quad

    f = lambda r: 2 * math.pi * r * p.Lambda * float(p.at(np.array([r]))[0]) ** 2 * math.exp(float(p.at(np.array([r]))[0]) ** 2)
    E = quad(f, 0, 5.0, limit=200, epsrel=1e-10)[0]
    assert abs(p.energy_at(5.0) - E) < 1e-7 * E


def test_with_linear_term():
    gamma = 3.0
    Lam = lambda_from_scaling(1.0, gamma)
    p0 = shoot_bubble(gamma, 0.0, Lam, 2.0)
    p1 = shoot_bubble(gamma, 1.0, Lam, 2.0)
    assert not p1.A_capped
    r = np.linspace(0.2, min(p0.r_end, p1.r_end), 8)
    assert np.all(p1.at(r) < p0.at(r))


def test_linear_term_capped():
    Lam = lambda_from_scaling(1.0, 3.0)
    p = shoot_bubble(3.0, 10.0, Lam, 2.0)
    assert p.A_capped
    assert p.A == pytest.approx(0.99 * 2.404825557695773**2 / 4, rel=1e-15)


def test_zero_crossing_detected():
    Lam = lambda_from_scaling(1.0, 2.0)
    p = shoot_bubble(2.0, 5.0, Lam, 1e4)
    assert p.stopped == "zero-crossing"
    assert abs(p.B[-1]) < 1e-8
    assert p.r_end < 1e4


def test_overflow_aborts():
    with pytest.raises(NumericalAbort):
        shoot_bubble(30.0, 0.0, 1.0, 1.0)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        shoot_bubble(3.0, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        shoot_bubble(3.0, 0.0, 0.0, 1.0)


def test_compare_expansion_zero_at_origin():
    p = _shot(4.0)
    s = np.array([0.0])
    g = p.gamma
    assert abs(p.at(s)[0] - (g - bubble.t0(s)[0] / g + bubble.s0(0.0) / g**3)) == 0.0


def test_compare_expansion_ablation():
    p = _shot(5.0)
    full = compare_expansion(p, 0.5)
    drop = compare_expansion(p, 0.5, drop_correction=True)
    assert drop.constant >= full.constant * 25 / 4


def test_compare_expansion_bounded_for_larger_gamma():
    consts = [compare_expansion(_shot(g), 0.5).constant for g in (4.0, 5.0, 6.0)]
    assert all(c < 10 for c in consts)
    assert consts[1] / consts[0] < 3 and consts[2] / consts[1] < 3


def test_compare_expansion_tolerance_independent():
    a = compare_expansion(_shot(3.0), 0.5).constant
    Lam = lambda_from_scaling(1.0, 3.0)
    b = compare_expansion(shoot_bubble(3.0, 0.0, Lam, 2 * r_delta(3.0, 1.0, 0.5), tol=1e-13), 0.5).constant
    assert abs(a - b) < 1e-4


def test_compare_expansion_profile_too_short():
    Lam = lambda_from_scaling(1.0, 4.0)
    p = shoot_bubble(4.0, 0.0, Lam, 10.0)
    with pytest.raises(ValueError):
        compare_expansion(p, 0.5)
