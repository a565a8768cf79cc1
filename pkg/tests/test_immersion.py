import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from legendrian import oracles
from legendrian.immersion import (
    ConsistencyError,
    LegendrianJet,
    ReparametrizedImmersion,
    SolverError,
    TorusImmersion,
    TwistedImmersion,
    closing_target,
    closing_tau,
    contact_pullback,
    gauss_curvature,
    gauss_curvature_fd,
    lagrangian_angle,
    period_lattice_member,
    period_residual,
    rotation_period,
    rotation_period_heuman,
    rotation_period_phase,
    rotation_period_report,
    tau_for_rotation_period,
)
from legendrian.profile import TAU_MAX, ParameterDomainError, solve_params
from legendrian.symmetry import (
    cyl_reflect_s,
    cyl_reflect_t,
    cyl_rotate,
    cyl_translate,
    equivariance_defect,
    half_turn,
    reflection_s,
    reflection_t,
    reflection_t_at,
    rotation,
    translation,
)

# closing parameter for m_bar = 3, from the ODE/event oracle: p_hat(TAU_BAR_3) - 12 pi / 22 ~ 3e-13
TAU_BAR_3 = 0.06609715228002803


@pytest.mark.parametrize("tau", [0.1, 0.05, TAU_BAR_3, 0.01])
def test_closed_form_matches_ode(tau):
    ti = TorusImmersion.from_tau(tau)
    t, w1, w2 = oracles.w_ode_oracle(tau, 2 * ti.params.p_tau)
    a1, a2 = ti.w(t)
    assert np.max(np.abs(a1 - w1)) < 1e-9
    assert np.max(np.abs(a2 - w2)) < 1e-9


def test_sphere_case():
    ti = TorusImmersion.from_tau(0.0)
    s, t = np.meshgrid(np.linspace(0, 6, 7), np.linspace(-3, 3, 9))
    X = ti(s, t).X
    ref = np.stack([np.tanh(t), np.cos(s) / np.cosh(t), -np.sin(s) / np.cosh(t)], -1)
    assert np.max(np.abs(X - ref)) < 1e-15


@pytest.mark.parametrize("tau", [1e-4, 0.01, TAU_BAR_3, 0.15, TAU_MAX * 0.999])
def test_special_legendrian(tau):
    ti = TorusImmersion.from_tau(tau)
    S, T, jet = ti.grid(48, 400, (-2 * ti.params.p_tau, 2 * ti.params.p_tau))
    assert np.max(jet.norm_defect()) < 1e-13
    assert np.max(np.abs(contact_pullback(jet))) < 1e-12
    assert np.max(np.abs(jet.lagrangian_defect())) < 1e-12
    assert np.max(np.abs(lagrangian_angle(jet))) < 1e-12
    # conformal: |X_s|^2 = |X_t|^2 = y, orthogonal
    gss, gst, gtt = jet.metric()
    from legendrian.profile import conformal_factor
    y = conformal_factor(ti.params, T)
    assert np.max(np.abs(gss - y)) < 1e-12
    assert np.max(np.abs(gtt - y)) < 1e-12
    assert np.max(np.abs(gst)) < 1e-12


def test_tangents_match_finite_differences():
    ti = TorusImmersion.from_tau(0.05)
    s, t = np.meshgrid(np.linspace(0, 6, 11), np.linspace(-4, 4, 17))
    j = ti(s, t)
    h = 1e-5
    assert np.max(np.abs((ti(s + h, t).X - ti(s - h, t).X) / (2 * h) - j.Xs)) < 1e-9
    assert np.max(np.abs((ti(s, t + h).X - ti(s, t - h).X) / (2 * h) - j.Xt)) < 1e-8


def test_lagrangian_angle_rejects_degenerate_jets():
    X = np.array([[1.0, 0, 0]], complex)
    jet = LegendrianJet(X, np.zeros_like(X), np.zeros_like(X))
    with pytest.raises(ValueError):
        lagrangian_angle(jet)


@pytest.mark.parametrize("tau,h", [(1e-3, 3e-3), (0.03, 1e-2), (TAU_BAR_3, 1e-2), (0.15, 1e-2)])
def test_curvature_formula_vs_finite_differences(tau, h):
    # the neck curvature is about -1/(4 tau), so the smallest tau needs a finer stencil
    p = solve_params(tau)
    t = np.linspace(-p.p_tau, p.p_tau, 301)
    assert np.max(np.abs(gauss_curvature(p, t) - gauss_curvature_fd(p, t, h))) < 1e-5


def test_curvature_endpoints():
    t = np.linspace(-2, 2, 9)
    assert np.all(gauss_curvature(solve_params(0.0), t) == 1.0)
    assert np.max(np.abs(gauss_curvature(solve_params(TAU_MAX), t))) < 1e-14


def test_rotation_period_two_routes():
    taus = np.geomspace(1e-4, 0.1, 20)
    rows = rotation_period_report(taus)
    assert max(r["abs_diff"] for r in rows) < 1e-9
    assert rotation_period_heuman(solve_params(0.0)) == pytest.approx(math.pi / 2)
    assert rotation_period_heuman(solve_params(TAU_MAX)) == pytest.approx(math.pi / math.sqrt(3))
    heu = [r["p_hat_heuman"] for r in rows]
    assert np.all(np.diff(heu) > 0)


@pytest.mark.parametrize("tau", [1e-3, 0.02, TAU_BAR_3, 0.12])
def test_rotation_period_against_ode_oracle(tau):
    p, p_hat = oracles.rotation_period_oracle(tau)
    P = solve_params(tau)
    assert P.p_tau == pytest.approx(p, abs=1e-9)
    assert rotation_period(P) == pytest.approx(p_hat, abs=1e-9)


def test_rotation_period_consistency_guard():
    with pytest.raises(ConsistencyError):
        rotation_period(solve_params(0.05), tol=-1.0)


def test_asymptotic_columns():
    rows = rotation_period_report([1e-2, 1e-3, 1e-4])
    assert all(abs(r["scaled_remainder"]) < 3 for r in rows)
    # dp_hat/dtau = -log(tau) - 1.61..., so the ratio tends to 1 only logarithmically
    ratios = [r["dp_hat_over_minus_log_tau"] for r in rows]
    assert ratios[0] < ratios[1] < ratios[2] < 1


def test_closing_tau():
    P = closing_tau(3)
    assert P.tau == pytest.approx(TAU_BAR_3, abs=1e-13)
    assert P.p_hat == pytest.approx(closing_target(3), abs=1e-12)
    for mb in (2, 4, 5, 8):
        P = closing_tau(mb)
        _, ph = oracles.rotation_period_oracle(P.tau)
        assert ph == pytest.approx(closing_target(mb), abs=1e-9)
    with pytest.raises(ParameterDomainError):
        closing_tau(1)
    with pytest.raises(SolverError):
        tau_for_rotation_period(3.0)


def test_period_lattice_and_residuals():
    P = closing_tau(3)
    ti = TorusImmersion(P)
    m = 11
    assert period_lattice_member(P, 0, m) or period_lattice_member(P, 1, m)
    assert period_residual(ti, 0.0, 2 * m * P.p_tau, ns=32, nt=128) < 1e-8
    for k in range(1, m):
        assert period_residual(ti, 0.0, 2 * k * P.p_tau, ns=32, nt=128) > 1e-3
        assert not period_lattice_member(P, 0, k)
    assert period_lattice_member(P, 2, 0) and not period_lattice_member(P, 1, 0)


@settings(max_examples=25, deadline=None)
@given(tau=st.floats(min_value=1e-3, max_value=0.18), k=st.integers(min_value=1, max_value=3))
def test_torus_symmetries(tau, k):
    ti = TorusImmersion.from_tau(tau)
    p, ph = ti.params.p_tau, ti.p_hat
    s = np.linspace(0, 2 * np.pi, 9)[:, None]
    t = np.linspace(-2 * p, 2 * p, 21)[None, :]
    assert equivariance_defect(ti, reflection_t(), cyl_reflect_t(0.0), s, t) < 1e-10
    assert equivariance_defect(ti, reflection_s(), cyl_reflect_s(0.0), s, t) < 1e-12
    assert equivariance_defect(ti, rotation(0.7), cyl_rotate(0.7), s, t) < 1e-12
    assert equivariance_defect(ti, reflection_t_at(k * ph), cyl_reflect_t(k * p), s, t) < 1e-9
    assert equivariance_defect(ti, translation(2 * k * ph), cyl_translate(2 * k * p), s, t) < 1e-9


class TestTwisted:
    tau, alpha = 0.05, 0.03

    @pytest.fixture(scope="class")
    @classmethod
    def tw(cls):
        return TwistedImmersion.from_tau(cls.tau, cls.alpha)

    def test_legendrian(self, tw):
        s = np.linspace(0, 2 * np.pi, 17)[:, None]
        t = np.linspace(-3 * tw.p_tau, 3 * tw.p_tau, 601)[None, :]
        j = tw(s, t)
        assert np.max(np.abs(j.contact_defect())) < 1e-10
        assert np.max(np.abs(j.lagrangian_defect())) < 1e-10
        assert np.max(j.norm_defect()) < 1e-13

    def test_symmetries(self, tw):
        s = np.linspace(0, 2 * np.pi, 9)[:, None]
        t = np.linspace(-2.5 * tw.p_tau, 2.5 * tw.p_tau, 41)[None, :]
        p = tw.p_tau
        P = tw.period_map
        assert equivariance_defect(tw, reflection_t(), cyl_reflect_t(0.0), s, t) < 1e-8
        assert equivariance_defect(tw, reflection_s(), cyl_reflect_s(0.0), s, t) < 1e-8
        assert equivariance_defect(tw, half_turn(), cyl_rotate(np.pi), s, t) < 1e-8
        for k in (1, 2):
            assert equivariance_defect(tw, P.power(k), cyl_translate(2 * k * p), s, t) < 1e-8
            assert equivariance_defect(tw, P.power(k) @ reflection_t(), cyl_reflect_t(k * p), s, t) < 1e-8

    def test_untwisted_is_torus(self):
        a = TwistedImmersion.from_tau(self.tau, 0.0)
        ti = TorusImmersion.from_tau(self.tau)
        s, t = np.meshgrid(np.linspace(0, 6, 7), np.linspace(-9, 9, 37))
        assert np.max(np.abs(a(s, t).X - ti(s, t).X)) < 1e-12

    def test_join_window_validation(self):
        with pytest.raises(ParameterDomainError):
            TwistedImmersion.from_tau(0.15, 0.01)
        TwistedImmersion.from_tau(0.15, 0.01, join_window=(0.2, 0.6))

    def test_reparametrized_period(self, tw):
        P = closing_tau(3)
        r = ReparametrizedImmersion(tw, P.p_tau)
        s = np.linspace(0, 2 * np.pi, 9)[:, None]
        t = np.linspace(-4, 4, 33)[None, :]
        assert equivariance_defect(r, tw.period_map, cyl_translate(2 * P.p_tau), s, t) < 1e-8
