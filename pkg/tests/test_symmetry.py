import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from legendrian.symmetry import (
    AmbientIsometry,
    check_commutation_table,
    check_form_pullbacks,
    cyl_reflect_s,
    cyl_reflect_t,
    cyl_rotate,
    cyl_translate,
    half_turn,
    identity,
    polygon_rotation,
    reflection_s,
    reflection_t,
    reflection_t_at,
    rotation,
    translating_twist,
    translation,
    twist,
)

angles = st.floats(min_value=-10, max_value=10, allow_nan=False)


def test_commutation_table_exact():
    rows = check_commutation_table()
    assert len(rows) > 50
    bad = [r for r in rows if r["defect"] > 1e-14]
    assert not bad, bad


def test_form_pullbacks():
    rows = check_form_pullbacks()
    bad = [r for r in rows if r["defect"] > 1e-12]
    assert not bad, bad


@settings(max_examples=50, deadline=None)
@given(x=angles, y=angles)
def test_one_parameter_groups(x, y):
    assert translation(x).unitarity_defect() < 1e-14
    assert (twist(x) @ twist(y)).distance(twist(x + y)) < 1e-13
    assert (translation(x) @ translation(-x)).distance(identity()) < 1e-14
    assert (rotation(x) @ rotation(y)).distance(rotation(x + y)) < 1e-13


@settings(max_examples=50, deadline=None)
@given(x=angles)
def test_antiholomorphic_composition(x):
    z = np.array([0.3 + 0.1j, -0.2 + 0.7j, 0.5 - 0.4j])
    T = reflection_t_at(x)
    assert T.conjugate_first
    assert np.allclose(T(T(z)), z, atol=1e-14)
    assert np.allclose((T @ T)(z), z, atol=1e-14)
    assert np.allclose(T.inverse()(T(z)), z, atol=1e-14)
    # composition acts as successive application
    A = twist(0.3) @ reflection_t() @ translation(x)
    assert np.allclose(A(z), twist(0.3)(reflection_t()(translation(x)(z))), atol=1e-14)


def test_powers_and_period_map():
    R = polygon_rotation(5)
    assert R.power(5).distance(identity()) < 1e-14
    assert R.power(-2).distance(R.inverse() @ R.inverse()) < 1e-14
    P = translating_twist(0.7, 0.2)
    assert P.distance(translation(1.4) @ twist(0.4)) < 1e-15
    assert half_turn().distance(rotation(np.pi)) < 1e-15
    assert reflection_s().distance(AmbientIsometry(np.diag([1, 1, -1]))) == 0.0
    with pytest.raises(ValueError):
        AmbientIsometry(np.eye(2))


def test_distance_distinguishes_conjugation():
    assert reflection_t().distance(AmbientIsometry(np.diag([-1.0, 1, 1]))) == np.inf


def test_cylinder_symmetries():
    s, t = np.array([0.3, 1.2]), np.array([-0.4, 2.5])
    assert np.allclose(cyl_reflect_t(1.5)(s, t)[1], 3.0 - t)
    assert np.allclose(cyl_reflect_s()(s, t)[0], -s)
    comp = cyl_translate(2.0) @ cyl_reflect_t(0.0)
    assert comp.same_as(cyl_reflect_t(1.0))
    assert (cyl_rotate(np.pi) @ cyl_rotate(np.pi)).same_as(cyl_rotate(0.0))
    assert not cyl_rotate(1.0).same_as(cyl_rotate(0.0))
