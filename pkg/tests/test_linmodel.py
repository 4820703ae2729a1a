import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from dldo.design import ValidationError, default_design
from dldo.linmodel import (
    ClosedLoopModel,
    build_model,
    closed_loop_poles,
    jury_stable,
    jury_table_stable,
    linear_step_response,
    overshoot_to_pm,
    pm_to_overshoot,
    root_locus,
)

alphas = st.floats(1e-6, 1 - 1e-6)
gains = st.floats(1e-6, 2.0)


def test_default_model_frozen():
    m = build_model(default_design())
    assert m.t_sample == pytest.approx(2e-8)
    assert m.f1 == pytest.approx(4800967.261904761, rel=1e-12)
    assert m.alpha == pytest.approx(0.9084464417860042, rel=1e-12)
    assert m.k_out == pytest.approx(27343.75, rel=1e-12)
    assert m.k_loop == pytest.approx(0.0005214402579410065, rel=1e-12)


def test_build_model_against_zoh_oracle():
    # ZOH of dv/dt = -f1 v + k_out u via the augmented matrix exponential
    d = default_design(k_forward=2, fs=20e6)
    m = build_model(d)
    f1, k_out, T = d.load_pole, d.i_dev / d.c_load, 1 / d.fs
    phi = expm(np.array([[-f1, k_out], [0.0, 0.0]]) * T)
    assert m.alpha == pytest.approx(phi[0, 0], rel=1e-12)
    assert m.k_loop == pytest.approx(2 * phi[0, 1], rel=1e-10)


def test_model_json_fields():
    m = build_model(default_design())
    assert list(m.to_dict()) == ["t_sample", "f1", "alpha", "k_out", "k_loop", "char_poly"]


def test_fs_ratio_conventions():
    m = build_model(default_design())
    assert m.fs_ratio == pytest.approx(default_design().fs_ratio)
    assert m.fs_ratio_hz == pytest.approx(2 * math.pi * m.fs_ratio)


@given(alphas, gains)
def test_char_poly_at_one(alpha, k):
    m = ClosedLoopModel.from_alpha(alpha, k)
    assert np.polyval(m.char_poly, 1.0) == pytest.approx(k * (1 - alpha), rel=1e-9, abs=1e-15)


@given(st.floats(1e3, 1e9), st.floats(1e-12, 1e-3))
def test_alpha_in_open_unit_interval(f1, t):
    alpha = math.exp(-f1 * t)
    if 0.0 < alpha < 1.0:
        m = ClosedLoopModel.from_alpha(alpha, 0.5, t)
        assert 0.0 < m.alpha < 1.0


@given(alphas, gains)
def test_jury_matches_root_oracle(alpha, k):
    m = ClosedLoopModel.from_alpha(alpha, k)
    radius = max(abs(p) for p in np.roots(m.char_poly))
    if abs(radius - 1.0) > 1e-9:
        assert jury_stable(m) == (radius < 1.0)


@given(alphas, gains)
def test_stability_is_zero_to_one_gain(alpha, k):
    if abs(k - 1.0) > 1e-9:
        assert jury_stable(ClosedLoopModel.from_alpha(alpha, k)) == (k < 1.0)


def test_jury_general_polynomials_against_roots():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        c = rng.normal(size=rng.integers(2, 7))
        radius = np.max(np.abs(np.roots(c)))
        if abs(radius - 1) > 1e-9:
            assert jury_table_stable(c) == (radius < 1)


def test_jury_edge_cases():
    assert jury_table_stable([1.0, -0.5])
    assert not jury_table_stable([1.0, -1.0])  # pole on the circle
    assert jury_table_stable([2.0])
    assert not jury_table_stable([-1.0, 1.5])


@given(alphas, gains)
def test_poles_are_roots(alpha, k):
    m = ClosedLoopModel.from_alpha(alpha, k)
    _, a1, a0 = m.char_poly
    for p in closed_loop_poles(m):
        assert abs(p * p + a1 * p + a0) < 1e-9


@given(alphas)
@settings(max_examples=50)
def test_root_locus_critical_gains(alpha):
    loc = root_locus(ClosedLoopModel.from_alpha(alpha, 0.1), 2.0, 41)
    assert loc.k_breakaway == pytest.approx((1 - alpha) / 4, rel=1e-9, abs=1e-15)
    assert loc.k_unstable == pytest.approx(1.0, abs=1e-6)
    assert loc.breakaway_point == pytest.approx((1 + alpha) / 2)


def test_root_locus_real_then_complex():
    alpha = 0.9
    loc = root_locus(ClosedLoopModel.from_alpha(alpha, 0.1), 1.5, 301)
    for k, p1, p2 in loc.points:
        if k < loc.k_breakaway * (1 - 1e-9):
            assert p1.imag == 0.0 and p2.imag == 0.0
        elif k > loc.k_breakaway * (1 + 1e-9):
            assert p1.imag != 0.0 and p1 == p2.conjugate()


def test_root_locus_validation():
    m = ClosedLoopModel.from_alpha(0.5, 0.1)
    with pytest.raises(ValidationError):
        root_locus(m, 0.0, 10)
    with pytest.raises(ValidationError):
        root_locus(m, 1.0, 1)


def _random_stable(rng):
    return ClosedLoopModel.from_alpha(rng.uniform(0.01, 0.99), rng.uniform(0.001, 0.99))


def test_step_response_closed_form_matches_recurrence():
    rng = np.random.default_rng(3)
    for _ in range(30):
        r = linear_step_response(_random_stable(rng), 2000)
        scale = np.max(np.abs(r.recurrence))
        assert np.max(np.abs(r.recurrence - r.closed_form)) <= 1e-9 * scale


def test_step_response_final_value_is_unity():
    # H(1) = K / (K (1 - alpha)) = 1 / (1 - alpha)
    m = ClosedLoopModel.from_alpha(0.5, 0.2)
    r = linear_step_response(m, 500)
    assert r.final_value == pytest.approx(1 / (1 - 0.5))
    assert r.recurrence[-1] == pytest.approx(r.final_value, rel=1e-9)


def test_step_response_repeated_pole():
    alpha = 0.6
    m = ClosedLoopModel.from_alpha(alpha, (1 - alpha) / 4)
    r = linear_step_response(m, 400)
    assert np.allclose(r.recurrence, r.closed_form, rtol=0, atol=1e-9 * np.abs(r.recurrence).max())


def test_step_response_first_samples():
    m = ClosedLoopModel.from_alpha(0.5, 0.3)
    r = linear_step_response(m, 4)
    # y0 = y1 = 0, y2 = K, y3 = (1 + alpha) K + K
    assert r.recurrence[:4] == pytest.approx([0.0, 0.0, 0.3, 1.5 * 0.3 + 0.3])


def test_overshoot_to_pm_frozen():
    zeta, pm = overshoot_to_pm(0.2)
    assert zeta == pytest.approx(0.4559498107691261, rel=1e-12)
    assert pm == pytest.approx(45.59498107691261, rel=1e-12)


@given(st.floats(1e-6, 0.999))
def test_overshoot_pm_roundtrip(os_):
    zeta, pm = overshoot_to_pm(os_)
    assert 0 < zeta < 1 and pm == pytest.approx(100 * zeta)
    assert pm_to_overshoot(zeta) == pytest.approx(os_, rel=1e-9)


@given(st.floats(1e-4, 0.99), st.floats(1e-4, 0.99))
def test_more_overshoot_means_less_margin(a, b):
    if a < b:
        assert overshoot_to_pm(a)[1] > overshoot_to_pm(b)[1]


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_overshoot_domain(bad):
    with pytest.raises(ValidationError):
        overshoot_to_pm(bad)
