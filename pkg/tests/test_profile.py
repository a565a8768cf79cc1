import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from legendrian.profile import (
    TAU_MAX,
    ParameterDomainError,
    conformal_factor,
    conformal_factor_with_derivative,
    decay_envelope_check,
    dp_dtau,
    one_minus_y,
    period_asymptotics_report,
    solve_params,
    ymin_to_tau,
)

from legendrian import oracles

taus = st.floats(min_value=1e-6, max_value=TAU_MAX * 0.999)


def test_endpoint_roots():
    p = solve_params(0.0)
    assert (p.y_minus, p.y_min, p.y_max) == (0.0, 0.0, 1.0)
    assert math.isinf(p.p_tau)
    q = solve_params(TAU_MAX)
    assert_allclose((q.y_minus, q.y_min, q.y_max), (-1 / 3, 2 / 3, 2 / 3), atol=1e-15)
    assert q.p_tau == pytest.approx(math.pi / 2)
    with pytest.raises(ParameterDomainError):
        solve_params(0.5)
    with pytest.raises(ParameterDomainError):
        solve_params(-0.1)


@settings(max_examples=80, deadline=None)
@given(tau=taus)
def test_roots_vieta_and_ordering(tau):
    p = solve_params(tau)
    assert p.y_minus <= 0 <= p.y_min <= p.y_max
    for y in (p.y_minus, p.y_min, p.y_max):
        assert abs(y**3 - y**2 + 4 * tau * tau) < 1e-12
    assert abs(p.y_minus + p.y_min + p.y_max - 1) < 1e-12
    assert abs(p.y_minus * p.y_min * p.y_max + 4 * tau * tau) < 1e-12
    assert p.modulus.k**2 + p.modulus.k_prime**2 == pytest.approx(1.0, abs=1e-15)


def test_small_tau_neck_depth():
    # bisection oracle for the middle root, independent of the trigonometric solver
    tau = 0.05
    lo, hi = 1e-9, 2.0 / 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid**3 - mid**2 + 4 * tau * tau > 0:
            lo = mid
        else:
            hi = mid
    p = solve_params(tau)
    assert p.y_min == pytest.approx(lo, abs=1e-14)
    assert abs(p.y_min - 2 * tau) < 2 * tau * tau * 4
    for t in (1e-2, 1e-3, 1e-5):
        assert solve_params(t).y_min / (2 * t) == pytest.approx(1.0, abs=3 * t)


def test_ymin_to_tau():
    assert ymin_to_tau(0.0) == 0.0
    assert ymin_to_tau(2 / 3) == pytest.approx(TAU_MAX, abs=1e-16)
    assert ymin_to_tau(0.1) == pytest.approx(0.05 * math.sqrt(0.9), abs=1e-16)
    for y in (1e-4, 0.05, 0.3, 0.6):
        assert solve_params(ymin_to_tau(y)).y_min == pytest.approx(y, abs=1e-10)
    with pytest.raises(ParameterDomainError):
        ymin_to_tau(0.7)


def test_conformal_factor_special_cases():
    t = np.linspace(-5, 5, 101)
    assert_allclose(conformal_factor(solve_params(0.0), t), 1 / np.cosh(t) ** 2, atol=1e-15)
    assert_allclose(conformal_factor(solve_params(TAU_MAX), t), 2 / 3)
    p = solve_params(0.05)
    assert conformal_factor(p, 0.0) == pytest.approx(p.y_max, abs=1e-15)
    assert conformal_factor(p, p.p_tau) == pytest.approx(p.y_min, abs=1e-13)


@pytest.mark.parametrize("tau", [0.1, 0.05, 0.01, 0.001])
def test_closed_form_matches_ode_oracle(tau):
    p = solve_params(tau)
    t = np.linspace(0, 2 * p.p_tau, 1001)
    sol = oracles.profile_ode_oracle(tau, 2 * p.p_tau)
    assert np.max(np.abs(sol.sol(t)[0] - conformal_factor(p, t))) < 1e-8


def test_ode_oracle_endpoint_cases():
    t = np.linspace(0, 5, 201)
    sol = oracles.profile_ode_oracle(0.0, 5.0)
    assert np.max(np.abs(sol.sol(t)[0] - 1 / np.cosh(t) ** 2)) < 1e-9
    sol = oracles.profile_ode_oracle(TAU_MAX, 5.0)
    assert np.max(np.abs(sol.sol(t)[0] - 2 / 3)) < 1e-9


@pytest.mark.parametrize("tau", [0.1, 0.01, 0.001])
def test_first_integral_and_symmetries(tau):
    p = solve_params(tau)
    t = np.linspace(-3 * p.p_tau, 3 * p.p_tau, 2001)
    h = 1e-5
    y = conformal_factor(p, t)
    ydot = (conformal_factor(p, t + h) - conformal_factor(p, t - h)) / (2 * h)
    assert np.max(np.abs(ydot**2 + 4 * (y**3 - y**2 + 4 * tau**2))) < 1e-8
    _, yd = conformal_factor_with_derivative(p, t)
    assert np.max(np.abs(yd - ydot)) < 1e-8
    assert np.array_equal(conformal_factor(p, t), conformal_factor(p, -t))
    assert np.max(np.abs(conformal_factor(p, t + 2 * p.p_tau) - y)) < 1e-10
    assert np.all((y >= p.y_min - 1e-15) & (y <= p.y_max + 1e-15))
    assert_allclose(one_minus_y(p, t), 1 - y, atol=1e-14)


def test_smooth_in_tau_squared():
    # y at fixed t as a function of s = tau^2: difference quotients stay bounded towards s = 0
    t = 0.7
    s_vals = np.array([1e-4, 4e-5, 1e-5, 4e-6, 1e-6])
    quot = []
    for s in s_vals:
        ds = s * 1e-3
        y1 = conformal_factor(solve_params(math.sqrt(s + ds)), t)
        y0 = conformal_factor(solve_params(math.sqrt(s - ds)), t)
        quot.append((y1 - y0) / (2 * ds))
    quot = np.array(quot)
    y0 = 1 / math.cosh(t) ** 2
    limit = (conformal_factor(solve_params(math.sqrt(1e-6)), t) - y0) / 1e-6
    assert np.all(np.isfinite(quot))
    assert np.max(np.abs(quot - limit)) < 0.05 * abs(limit) + 1e-3


def test_period_asymptotics():
    rows = period_asymptotics_report([1e-3, 1e-4, 1e-5])
    assert abs(rows[0]["p_plus_half_log_tau"]) < 3
    assert rows[1]["p_tau"] - rows[2]["p_tau"] == pytest.approx(-0.5 * math.log(10), abs=1e-3)
    assert rows[2]["two_tau_dp_dtau"] == pytest.approx(-1.0, abs=1e-3)
    assert math.isfinite(solve_params(TAU_MAX * (1 - 1e-9)).p_tau)


@pytest.mark.parametrize("tau", [0.1, 0.01, 1e-4])
def test_dp_dtau_against_finite_difference(tau):
    h = tau * 1e-5
    fd = (solve_params(tau + h).p_tau - solve_params(tau - h).p_tau) / (2 * h)
    assert dp_dtau(solve_params(tau)) == pytest.approx(fd, rel=1e-6)


def test_decay_envelope():
    assert decay_envelope_check(solve_params(0.0))["min_margin"] >= 0
    rep = decay_envelope_check(solve_params(0.01), n=10_000)
    assert rep["min_margin"] >= 0 and rep["min_increment"] > 0
    products = [decay_envelope_check(solve_params(t), n=200)["neck_product"] for t in (0.05, 1e-3, 1e-5)]
    assert max(products) < 10 and min(products) > 0.1
