"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (the lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.  Every criterion also writes its evidence
as CSV so the determinism criterion can compare two complete runs byte for byte.
"""

import csv
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from dldo.design import EdgeMode, default_design
from dldo.explorer import SweepAxis, SweepSpec, report_recommendation, run_sweep, write_records_csv
from dldo.limitcycle import design_mode_map
from dldo.linmodel import (
    ClosedLoopModel,
    build_model,
    jury_stable,
    linear_step_response,
    root_locus,
)
from dldo.loopsim import Event, SimScenario, simulate
from dldo.metrics import ModeKind, measure

SEED = 20240611
MODE_RATIOS = [float(r) for r in np.linspace(1.0, 30.0, 30)]
SWEEP_RATIOS = tuple(float(r) for r in range(2, 21))


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def crit_stability_boundary(out: Path):
    rng = np.random.default_rng(SEED)
    alphas = rng.uniform(0.0, 1.0, 1000)
    gains = rng.uniform(0.0, 2.0, 1000)
    rows, agree = [], 0
    for a, k in zip(alphas, gains):
        m = ClosedLoopModel.from_alpha(float(a), float(k))
        oracle = bool(np.max(np.abs(np.roots(m.char_poly))) < 1.0)
        got = jury_stable(m)
        agree += got == oracle
        rows.append((float(a), float(k), got, oracle))
    k_unst = {a: root_locus(ClosedLoopModel.from_alpha(a, 0.1), 2.0, 11).k_unstable
              for a in (0.5, 0.9608, 0.99)}
    rows += [(a, k, "k_unstable", "") for a, k in k_unst.items()]
    _write(out / "c01_stability.csv", ["alpha", "k_loop", "jury", "oracle"], rows)
    worst = max(abs(k - 1.0) for k in k_unst.values())
    ok = agree == 1000 and worst <= 1e-6
    return ok, f"jury/oracle agreement {agree}/1000, max |k_unstable - 1| = {worst:.1e}"


def crit_root_locus(out: Path):
    rows, worst, split_ok = [], 0.0, True
    for alpha in (0.3, 0.6, 0.9, 0.9608, 0.99):
        loc = root_locus(ClosedLoopModel.from_alpha(alpha, 0.1), 1.5, 301)
        worst = max(worst, abs(loc.k_breakaway - (1 - alpha) / 4))
        for k, p1, p2 in loc.points:
            if k < loc.k_breakaway * (1 - 1e-9):
                split_ok &= p1.imag == 0.0 and p2.imag == 0.0
            elif k > loc.k_breakaway * (1 + 1e-9):
                split_ok &= p1.imag != 0.0
        rows.append((alpha, loc.k_breakaway, loc.breakaway_point))
    # lighter load, slower load pole, larger alpha
    loads = (3e-3, 2e-3, 1e-3, 0.5e-3, 0.2e-3)
    points = []
    for i_load in loads:
        model = build_model(default_design(r_load=0.7 / i_load))
        points.append(root_locus(model, 1.5, 11).breakaway_point)
        rows.append((model.alpha, model.k_loop, points[-1]))
    toward_one = all(b > a for a, b in zip(points[:-1], points[1:]))
    _write(out / "c02_locus.csv", ["alpha", "k_breakaway", "breakaway_point"], rows)
    ok = worst <= 1e-9 and split_ok and toward_one
    return ok, (f"max |k_b - (1-alpha)/4| = {worst:.1e}, real/complex split {split_ok}, "
                f"breakaway moves toward z=1 as load lightens {toward_one}")


def crit_step_response(out: Path):
    rng = np.random.default_rng(SEED + 3)
    rows, worst = [], 0.0
    for _ in range(100):
        m = ClosedLoopModel.from_alpha(float(rng.uniform(0.001, 0.999)),
                                       float(rng.uniform(0.001, 0.999)))
        r = linear_step_response(m, 10_000)
        err = float(np.max(np.abs(r.recurrence - r.closed_form)) / np.max(np.abs(r.recurrence)))
        worst = max(worst, err)
        rows.append((m.alpha, m.k_loop, float(r.recurrence[-1]), err <= 1e-9))
    _write(out / "c03_step.csv", ["alpha", "k_loop", "y_last", "within_tol"], rows)
    return worst <= 1e-9, f"worst relative error {worst:.1e} over 100 models x 1e4 samples"


def crit_simulator_exactness(out: Path):
    pool = []
    scenarios = [
        SimScenario(default_design(edge_mode="DualEdge", k_forward=kf).with_fs_ratio(r),
                    duration_cycles=20000,
                    events=(Event.load_current_step(2e-5 / r, 2.4e-3, 0.7),
                            Event.reference_step(4e-5 / r, 0.6)))
        for kf, r in ((1, 3.0), (2, 10.0), (3, 25.0))
    ]
    scenarios.append(SimScenario(default_design(plant_mode="CurrentSource"),
                                 duration_cycles=6000))
    for sc in scenarios:
        s = simulate(sc).segments
        d = sc.design
        if d.plant_mode.value == "CurrentSource":
            tau = s.r_load * d.c_load
            vss = s.d_word * d.i_dev * s.r_load
        else:
            g = 1.0 / s.r_load + s.d_word / d.r_dev
            tau = d.c_load / g
            vss = s.d_word * d.vdd / d.r_dev / g
        ref = vss + (s.v0 - vss) * np.exp(-s.dt / tau)
        pool.append(np.abs(s.v1 - ref) / np.maximum(np.abs(ref), 1e-300))
    rel = np.concatenate(pool)
    rng = np.random.default_rng(SEED + 4)
    pick = rng.choice(len(rel), size=100_000, replace=False)
    worst = float(rel[pick].max())
    _write(out / "c04_segments.csv", ["segments_pool", "checked", "worst_rel"],
           [(len(rel), 100_000, worst)])
    return worst <= 1e-12, f"100000 of {len(rel)} segments, worst relative error {worst:.1e}"


def _load_step_rise(fs):
    d = default_design(fs=fs, k_forward=1, c_load=1e-9, r_load=0.7 / 0.9e-3)
    sc = SimScenario(d, duration_cycles=int(round(4096 * fs / 10e6)),
                     events=(Event.load_current_step(0.0, 2.4e-3, 0.7),))
    return measure(simulate(sc), d).t_rise


def crit_fs_transient(out: Path):
    slow, fast = _load_step_rise(10e6), _load_step_rise(50e6)
    ratio = slow / fast if slow and fast else math.nan
    _write(out / "c05_fs.csv", ["fs", "t_rise"], [(10e6, slow), (50e6, fast)])
    return ratio >= 3.0, f"t_rise 10 MHz / 50 MHz = {ratio:.2f} (need >= 3)"


def _startup_rise(fs, kf):
    d = default_design(fs=fs, k_forward=kf, r_load=0.7 / 1.5e-3)
    return measure(simulate(SimScenario(d, duration_cycles=int(round(4096 * fs / 10e6)))),
                   d).t_rise


def crit_gain_trend(out: Path):
    k1, k3, k1_fast = _startup_rise(50e6, 1), _startup_rise(50e6, 3), _startup_rise(125e6, 1)
    equiv = k3 / k1_fast
    _write(out / "c06_gain.csv", ["fs", "k_forward", "t_rise"],
           [(50e6, 1, k1), (50e6, 3, k3), (125e6, 1, k1_fast)])
    ok = k3 < k1 and 0.5 <= equiv <= 2.0
    return ok, (f"t_rise kf=3 {k3:.3e} < kf=1 {k1:.3e}; "
                f"kf=3 @50 MHz vs kf=1 @125 MHz ratio {equiv:.2f} (need within 2x)")


def _mode_rows(mm):
    return [(r, mm.edge_mode.value, " ".join(map(str, pred)), mx, str(sim))
            for r, pred, mx, sim in zip(mm.ratio_grid, mm.predicted, mm.max_mode, mm.simulated)]


def crit_mode_concordance(out: Path):
    mm = design_mode_map(default_design(), MODE_RATIOS, 64, EdgeMode.SINGLE_EDGE,
                         with_simulation=True)
    unique = [(pred[0], sim) for pred, sim in zip(mm.predicted, mm.simulated)
              if len(pred) == 1 and sim.kind is not ModeKind.MIXED]
    unique_hits = sum(sim.kind is ModeKind.PURE and sim.n == n for n, sim in unique)
    unique_ok = not unique or unique_hits >= 0.8 * len(unique)
    in_set = sum(sim.kind is ModeKind.PURE and sim.n in pred
                 for pred, sim in zip(mm.predicted, mm.simulated))
    monotone = all(b >= a for a, b in zip(mm.max_mode[:-1], mm.max_mode[1:]))
    _write(out / "c07_modes.csv", ["ratio", "edge_mode", "predicted", "max_mode", "simulated"],
           _mode_rows(mm))
    ok = unique_ok and monotone and in_set >= 0.8 * len(MODE_RATIOS)
    return ok, (f"unique-prediction points {len(unique)} (hits {unique_hits}); simulated mode "
                f"inside predicted set {in_set}/30; max mode non-decreasing {monotone}")


def crit_dual_edge(out: Path):
    maps = {em: design_mode_map(default_design(), MODE_RATIOS, 64, em, with_simulation=True)
            for em in EdgeMode}
    single, dual = maps[EdgeMode.SINGLE_EDGE], maps[EdgeMode.DUAL_EDGE]
    pred_ok = all(b <= a for a, b in zip(single.max_mode, dual.max_mode))
    sim_ok = all(b.order is not None and a.order is not None and b.order <= a.order
                 for a, b in zip(single.simulated, dual.simulated))
    _write(out / "c08_dual.csv", ["ratio", "edge_mode", "predicted", "max_mode", "simulated"],
           _mode_rows(single) + _mode_rows(dual))
    return pred_ok and sim_ok, f"dual <= single predicted {pred_ok}, simulated {sim_ok}"


def _ratio_sweep():
    return run_sweep(SweepSpec(default_design(), SweepAxis("fs_ratio", SWEEP_RATIOS)))


def crit_ripple_shape(out: Path):
    result = _ratio_sweep()
    modes, ripple = result.column("mode_order"), result.column("ripple_pp")
    within_ok, jumps, pairs = True, 0, 0
    for i in range(len(modes) - 1):
        if modes[i] == modes[i + 1]:
            pairs += 1
            within_ok &= ripple[i + 1] < ripple[i]
        elif ripple[i + 1] > ripple[i]:
            jumps += 1
    write_records_csv(out / "c09_ripple.csv", result.header(), result.records())
    return within_ok and jumps >= 1, (f"ripple decreases on all {pairs} same-mode pairs "
                                      f"{within_ok}; upward jumps at transitions {jumps}")


def crit_recommendation(out: Path):
    result = _ratio_sweep()
    rec = report_recommendation(result)
    lo, hi = rec.window
    _write(out / "c10_recommend.csv", ["fs_ratio", "score"], list(zip(rec.ratios, rec.scores)))
    ok = lo <= 10.0 and hi >= 5.0
    return ok, f"window [{lo:g}, {hi:g}] (best {rec.best_ratio:g}) vs [5, 10]"


CRITERIA = [
    (1, "stability boundary", crit_stability_boundary, 1.0),
    (2, "root locus", crit_root_locus, 1.0),
    (3, "linear step response", crit_step_response, 5.0),
    (4, "simulator exactness", crit_simulator_exactness, 5.0),
    (5, "fs transient trend", crit_fs_transient, 10.0),
    (6, "gain trend", crit_gain_trend, 10.0),
    (7, "mode map concordance", crit_mode_concordance, 60.0),
    (8, "dual-edge reduction", crit_dual_edge, 60.0),
    (9, "ripple non-monotonicity", crit_ripple_shape, 30.0),
    (10, "recommendation window", crit_recommendation, 30.0),
]


def run_criterion(num, out: Path):
    _, title, fn, limit = CRITERIA[num - 1]
    t0 = time.perf_counter()
    ok, detail = fn(out)
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < limit
    line = (f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {title}: {detail} "
            f"[{elapsed:.2f} s, limit {limit:g} s]")
    return ok, line


def run_determinism(out_a: Path, out_b: Path):
    for out in (out_a, out_b):
        out.mkdir(parents=True, exist_ok=True)
        for num, *_ in CRITERIA:
            run_criterion(num, out)
    names = sorted(p.name for p in out_a.glob("*.csv"))
    same = [n for n in names if (out_a / n).read_bytes() == (out_b / n).read_bytes()]
    ok = len(names) == len(CRITERIA) and len(same) == len(names)
    line = (f"{'PASS' if ok else 'FAIL'} criterion 11 determinism: "
            f"{len(same)}/{len(names)} CSV outputs byte-identical across two full runs")
    return ok, line


def _check(num, tmp_path, acceptance_log):
    ok, line = run_criterion(num, tmp_path)
    print(line)
    acceptance_log.append(line)
    assert ok, line


def test_criterion_01_stability_boundary(tmp_path, acceptance_log):
    _check(1, tmp_path, acceptance_log)


def test_criterion_02_root_locus(tmp_path, acceptance_log):
    _check(2, tmp_path, acceptance_log)


def test_criterion_03_step_response(tmp_path, acceptance_log):
    _check(3, tmp_path, acceptance_log)


def test_criterion_04_simulator_exactness(tmp_path, acceptance_log):
    _check(4, tmp_path, acceptance_log)


def test_criterion_05_fs_transient(tmp_path, acceptance_log):
    _check(5, tmp_path, acceptance_log)


def test_criterion_06_gain_trend(tmp_path, acceptance_log):
    _check(6, tmp_path, acceptance_log)


def test_criterion_07_mode_concordance(tmp_path, acceptance_log):
    _check(7, tmp_path, acceptance_log)


def test_criterion_08_dual_edge(tmp_path, acceptance_log):
    _check(8, tmp_path, acceptance_log)


def test_criterion_09_ripple_shape(tmp_path, acceptance_log):
    _check(9, tmp_path, acceptance_log)


def test_criterion_10_recommendation(tmp_path, acceptance_log):
    _check(10, tmp_path, acceptance_log)


def test_criterion_11_determinism(tmp_path, acceptance_log):
    ok, line = run_determinism(tmp_path / "run1", tmp_path / "run2")
    print(line)
    acceptance_log.append(line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for num, *_ in CRITERIA:
            ok, line = run_criterion(num, Path(tmp))
            print(line, flush=True)
            failures += not ok
        ok, line = run_determinism(Path(tmp) / "a", Path(tmp) / "b")
        print(line)
        failures += not ok
    sys.exit(1 if failures else 0)
