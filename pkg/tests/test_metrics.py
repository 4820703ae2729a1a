import numpy as np
import pytest
from hypothesis import given, strategies as st

from dldo.design import ValidationError, default_design
from dldo.linmodel import overshoot_to_pm
from dldo.loopsim import Event, SimScenario, simulate
from dldo.metrics import ModeKind, ModeLabel, detect_mode, measure, steady_window


def _pattern(runs, total=256):
    word, sign = [], 1
    for r in runs:
        word += [sign] * r
        sign = -sign
    return np.resize(np.array(word), total)


@pytest.mark.parametrize("n", [1, 2, 5, 11, 16])
def test_pure_modes(n):
    assert detect_mode(_pattern([n, n])) == ModeLabel.pure(n)


def test_pure_mode_independent_of_phase():
    seq = _pattern([4, 4], 300)
    for shift in range(8):
        assert detect_mode(seq[shift:shift + 256]) == ModeLabel.pure(4)


def test_mixed_mode_runs():
    label = detect_mode(_pattern([2, 1, 1, 2]))
    assert label.kind is ModeKind.MIXED
    assert label.runs == (2, 1, 1, 2)
    assert label.modes == (1, 2)
    assert label.order == 2
    assert str(label) == "Mixed(2 1 1 2)"


def test_unequal_half_periods_are_mixed():
    label = detect_mode(_pattern([3, 2]))
    assert label.kind is ModeKind.MIXED and label.runs == (3, 2)


def test_constant_and_aperiodic_sequences_have_no_mode():
    assert detect_mode(np.ones(128, dtype=int)) == ModeLabel.none()
    rng = np.random.default_rng(0)
    assert detect_mode(rng.choice([-1, 1], 256)).kind is ModeKind.NONE


def test_period_longer_than_quarter_window_is_none():
    assert detect_mode(_pattern([40, 40], 256)).kind is ModeKind.NONE


def test_detect_mode_validation():
    with pytest.raises(ValidationError):
        detect_mode([1, -1] * 10)
    with pytest.raises(ValidationError):
        detect_mode([1, 0] * 64)


@given(st.integers(1, 16), st.integers(0, 31))
def test_pure_mode_property(n, shift):
    seq = _pattern([n, n], 256 + 2 * n)[shift % (2 * n):][:256]
    assert detect_mode(seq) == ModeLabel.pure(n)


def test_mode_label_strings():
    assert str(ModeLabel.pure(3)) == "Pure(3)"
    assert str(ModeLabel.none()) == "None"
    assert ModeLabel.none().order is None


def test_steady_window():
    assert steady_window(4096) == 1024
    assert steady_window(600) == 256
    assert steady_window(100) == 100


def test_default_startup_metrics_frozen():
    design = default_design()
    m = measure(simulate(SimScenario(design)), design)
    assert m.settled
    assert m.t_rise == pytest.approx(9.363108552012337e-07, rel=1e-9)
    assert m.overshoot_fraction == pytest.approx(0.04393668285415408, rel=1e-9)
    assert m.ripple_pp == pytest.approx(0.01592428465879392, rel=1e-9)
    assert m.detected_mode == ModeLabel.pure(11)
    # every cycle moves the word by one device, so activity is 2 fs
    assert m.activity_per_second == pytest.approx(2 * design.fs)
    assert m.pm_estimate == pytest.approx(overshoot_to_pm(m.overshoot_fraction)[1])


def _fine_waveform(trace, per_segment=400):
    s = trace.segments
    frac = np.linspace(0.0, 1.0, per_segment, endpoint=False)
    t = (s.t0[:, None] + s.dt[:, None] * frac).ravel()
    v = (s.v_ss[:, None] + (s.v0 - s.v_ss)[:, None]
         * np.exp(-(s.dt[:, None] * frac) / s.tau[:, None])).ravel()
    return np.append(t, trace.t_end), np.append(v, s.v1[-1])


@pytest.mark.parametrize("kwargs", [dict(), dict(k_forward=3), dict(fs=10e6),
                                    dict(edge_mode="DualEdge", fs=20e6)])
def test_rise_time_against_fine_grid_oracle(kwargs):
    design = default_design(**kwargs)
    trace = simulate(SimScenario(design))
    m = measure(trace, design)
    t, v = _fine_waveform(trace)
    inside = np.abs(v - design.vref) <= 0.05 * design.vref
    hold = 31 * design.t_sample
    oracle = None
    for j in np.flatnonzero(inside & ~np.roll(inside, 1)):
        outs = np.flatnonzero(~inside[j:])
        end = t[j + outs[0] - 1] if len(outs) else t[-1]
        if end - t[j] >= hold - 1e-15:
            oracle = t[j]
            break
    assert oracle is not None
    assert m.t_rise == pytest.approx(oracle, abs=design.t_sample / 400)


def test_never_settles_gives_none():
    # a full array cannot reach vref against a 50 ohm load
    design = default_design(r_load=50.0)
    m = measure(simulate(SimScenario(design, duration_cycles=512)), design)
    assert m.t_rise is None and not m.settled and m.pm_estimate is None


def test_ripple_is_peak_to_peak_of_the_steady_window():
    trace = simulate(SimScenario(default_design(), duration_cycles=2048))
    m = measure(trace)
    t0 = trace.t[-512]
    sel = trace.dense_t >= t0
    assert m.ripple_pp == trace.dense_v[sel].max() - trace.dense_v[sel].min()


def test_reference_step_metrics_use_final_reference():
    design = default_design()
    T = design.t_sample
    trace = simulate(SimScenario(design, duration_cycles=4096,
                                 events=(Event.reference_step(500 * T, 0.6),)))
    m = measure(trace)
    assert abs(m.v_final - 0.6) < 0.01


def test_measure_validation():
    trace = simulate(SimScenario(default_design(), duration_cycles=32))
    with pytest.raises(ValidationError):
        measure(trace)
    trace = simulate(SimScenario(default_design(), duration_cycles=256))
    with pytest.raises(ValidationError):
        measure(trace, default_design(n_devices=4))
