"""Design-space sweeps, the stability / iso-rise-time map and the fs/F1 recommendation."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import warnings
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .design import LdoDesign, NumericalError, ValidationError
from .limitcycle import mode_exists
from .linmodel import build_model, jury_stable
from .loopsim import SimScenario, simulate
from .metrics import Metrics, measure

log = logging.getLogger(__name__)

RATIO_AXIS = "fs_ratio"
_RATIO_ALIASES = {"fs_ratio", "fs/f1", "fs_over_f1"}
_DESIGN_FIELDS = {f.name for f in dataclasses.fields(LdoDesign)} - {"plant_mode", "edge_mode"}
_SCENARIO_FIELDS = {"v_out_initial", "d_initial", "duration_cycles"}
_INT_FIELDS = {"n_devices", "k_forward", "d_initial", "duration_cycles"}

METRIC_NAMES = ("t_rise", "overshoot_fraction", "pm_estimate", "ripple_pp",
                "detected_mode", "activity_per_second", "settled")
DEFAULT_N_MAX = 64


def canonical_param(name: str) -> str:
    if name in _RATIO_ALIASES:
        return RATIO_AXIS
    if name in _DESIGN_FIELDS or name in _SCENARIO_FIELDS:
        return name
    raise ValidationError(f"unknown sweep parameter {name!r}", "name")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "name", canonical_param(self.name))
        vals = tuple(int(v) if self.name in _INT_FIELDS and float(v).is_integer() else float(v)
                     for v in self.values)
        if not vals:
            raise ValidationError(f"axis {self.name!r} grid is empty", "values")
        if any(b <= a for a, b in zip(vals[:-1], vals[1:])):
            raise ValidationError(f"axis {self.name!r} grid must be strictly increasing", "values")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepSpec:
    base_design: LdoDesign
    axis1: SweepAxis
    axis2: SweepAxis | None = None
    scenario_template: SimScenario | None = None
    outputs: tuple[str, ...] = METRIC_NAMES
    vary: str = "fs"
    n_max: int = DEFAULT_N_MAX
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        bad = [o for o in self.outputs if o not in METRIC_NAMES]
        if bad:
            raise ValidationError(f"unknown output metric(s): {bad}", "outputs")
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise ValidationError("axis1 and axis2 must differ", "axis2")
        if self.vary not in ("fs", "r_load"):
            raise ValidationError("vary must be 'fs' or 'r_load'", "vary")

    @property
    def axis_names(self) -> tuple[str, ...]:
        return (self.axis1.name,) + ((self.axis2.name,) if self.axis2 else ())

    def grid(self) -> list[dict[str, float]]:
        """Grid points in axis1-major order."""
        if self.axis2 is None:
            return [{self.axis1.name: v} for v in self.axis1.values]
        return [{self.axis1.name: a, self.axis2.name: b}
                for a in self.axis1.values for b in self.axis2.values]


@dataclass
class SweepRow:
    params: dict[str, float]
    valid: bool
    error: str = ""
    fs: float | None = None
    fs_ratio: float | None = None
    fs_ratio_hz: float | None = None
    k_loop: float | None = None
    jury_stable: bool | None = None
    bounded: bool | None = None
    predicted_max_mode: int | None = None
    metrics: Metrics | None = None

    @property
    def stable(self) -> bool:
        """Jury-stable linear model, bounded simulated output and settled rise."""
        return bool(self.valid and self.jury_stable and self.bounded
                    and self.metrics is not None and self.metrics.settled)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)

    def column(self, name: str) -> list[Any]:
        out = []
        for r in self.rows:
            if name in r.params:
                out.append(r.params[name])
            elif hasattr(r, name) and name != "metrics":
                out.append(getattr(r, name))
            elif r.metrics is None:
                out.append(None)
            else:
                out.append(r.metrics.to_dict()[name])
        return out

    def header(self) -> list[str]:
        axes = list(self.spec.axis_names)
        fixed = ["valid", "fs", "fs_ratio", "fs_ratio_hz", "k_loop", "jury_stable",
                 "bounded", "stable", "predicted_max_mode"]
        return (axes + [c for c in fixed if c not in axes]
                + list(self.spec.outputs) + ["mode_order", "error"])

    def records(self) -> list[dict[str, Any]]:
        out = []
        for r in self.rows:
            rec: dict[str, Any] = dict(r.params)
            rec.update(valid=r.valid, fs=r.fs, fs_ratio=r.fs_ratio, fs_ratio_hz=r.fs_ratio_hz,
                       k_loop=r.k_loop, jury_stable=r.jury_stable, bounded=r.bounded,
                       stable=r.stable, predicted_max_mode=r.predicted_max_mode)
            m = r.metrics.to_dict() if r.metrics is not None else {}
            for name in self.spec.outputs:
                rec[name] = m.get(name)
            rec["mode_order"] = m.get("mode_order")
            rec["error"] = r.error
            out.append(rec)
        return out


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(path: str | Path, header: Sequence[str],
                      records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([_cell(rec.get(h)) for h in header])


def apply_params(design: LdoDesign, scenario: SimScenario | None,
                 params: dict[str, float], vary: str = "fs") -> tuple[LdoDesign, SimScenario]:
    """Design and scenario for one grid point; the fs/F1 ratio is applied last."""
    d_changes: dict[str, Any] = {}
    s_changes: dict[str, Any] = {}
    for name, value in params.items():
        name = canonical_param(name)
        if name in _INT_FIELDS:
            if float(value) != int(value):
                raise ValidationError(f"{name} must be an integer, got {value}", name)
            value = int(value)
        if name in _SCENARIO_FIELDS:
            s_changes[name] = value
        elif name != RATIO_AXIS:
            d_changes[name] = value
    new_design = design.replace(**d_changes) if d_changes else design
    if RATIO_AXIS in params:
        new_design = new_design.with_fs_ratio(float(params[RATIO_AXIS]), vary)
    tmpl = scenario or SimScenario(new_design)
    new_scenario = SimScenario(
        design=new_design,
        v_out_initial=s_changes.get("v_out_initial", tmpl.v_out_initial),
        d_initial=s_changes.get("d_initial", tmpl.d_initial),
        duration_cycles=s_changes.get("duration_cycles", tmpl.duration_cycles),
        events=tmpl.events,
    )
    return new_design, new_scenario


def predicted_max_mode(model, edge_mode, n_max: int = DEFAULT_N_MAX) -> int:
    best = 0
    for n in range(1, n_max + 1):
        if mode_exists(n, model, edge_mode).exists:
            best = n
    return best


def _check_finite(metrics: Metrics) -> None:
    for name in ("t_rise", "overshoot_fraction", "pm_estimate", "ripple_pp",
                 "activity_per_second", "v_final"):
        v = getattr(metrics, name)
        if v is not None and not math.isfinite(v):
            raise NumericalError(f"non-finite metric {name} = {v}")


def evaluate_point(base_design: LdoDesign, scenario_template: SimScenario | None,
                   params: dict[str, float], vary: str = "fs",
                   n_max: int = DEFAULT_N_MAX) -> SweepRow:
    """Standalone pipeline for one grid point: model, Jury test, simulation, metrics, DF.

    Invalid designs yield a row flagged invalid instead of raising.
    """
    try:
        design, scenario = apply_params(base_design, scenario_template, params, vary)
    except ValidationError as exc:
        return SweepRow(params=dict(params), valid=False, error=str(exc))
    model = build_model(design)
    trace = simulate(scenario)
    metrics = measure(trace, design)
    _check_finite(metrics)
    v_abs = np.abs(trace.dense_v)
    bounded = bool(np.all(np.isfinite(v_abs)) and v_abs.max() <= 10.0 * design.vdd)
    return SweepRow(
        params=dict(params), valid=True, fs=design.fs, fs_ratio=design.fs_ratio,
        fs_ratio_hz=2.0 * math.pi * design.fs_ratio, k_loop=model.k_loop,
        jury_stable=jury_stable(model), bounded=bounded,
        predicted_max_mode=predicted_max_mode(model, design.edge_mode, n_max),
        metrics=metrics,
    )


def _evaluate_args(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Evaluate every grid point, axis1-major; row order is independent of ``workers``."""
    jobs = [(spec.base_design, spec.scenario_template, p, spec.vary, spec.n_max)
            for p in spec.grid()]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_evaluate_args, jobs))
    else:
        rows = [_evaluate_args(j) for j in jobs]
    return SweepResult(spec=spec, rows=rows)


@dataclass
class Contour:
    level: float
    lines: list[np.ndarray]  # each (k, 2) array of (axis1, axis2) vertices


@dataclass
class StabilityMap:
    result: SweepResult
    x: np.ndarray
    y: np.ndarray
    t_rise: np.ndarray  # shape (len(y), len(x)), NaN where unstable
    stable: np.ndarray
    contours: list[Contour]

    def contour_records(self) -> list[dict[str, Any]]:
        recs = []
        for c in self.contours:
            for line_id, line in enumerate(c.lines):
                for i, (xv, yv) in enumerate(line.tolist()):
                    recs.append({"level": c.level, "line": line_id, "point": i,
                                 self.result.spec.axis1.name: xv,
                                 self.result.spec.axis2.name: yv})
        return recs

    def contour_header(self) -> list[str]:
        return ["level", "line", "point", self.result.spec.axis1.name,
                self.result.spec.axis2.name]


def iso_contours(x: np.ndarray, y: np.ndarray, z: np.ndarray,
                 levels: Sequence[float]) -> list[Contour]:
    """Marching-squares iso-lines of ``z`` (NaN cells masked) at ``levels``."""
    import contourpy

    zm = np.ma.masked_invalid(z)
    if zm.count() == 0:
        return []
    gen = contourpy.contour_generator(x, y, zm, name="serial", corner_mask=False,
                                      line_type=contourpy.LineType.Separate)
    out = []
    for level in levels:
        lines = [np.asarray(seg, dtype=float) for seg in gen.lines(float(level))]
        out.append(Contour(level=float(level), lines=lines))
    return out


def default_levels(values: np.ndarray, count: int = 4) -> list[float]:
    finite = values[np.isfinite(values)]
    if finite.size < 2 or finite.min() == finite.max():
        return []
    return [float(v) for v in np.geomspace(finite.min(), finite.max(), count + 2)[1:-1]]


def stability_map(spec: SweepSpec, levels: Sequence[float] | None = None) -> StabilityMap:
    """Per-cell stability classification and iso-rise-time contours over two axes."""
    if spec.axis2 is None:
        raise ValidationError("stability map needs two axes", "axis2")
    result = run_sweep(spec)
    x = np.asarray(spec.axis1.values)
    y = np.asarray(spec.axis2.values)
    t_rise = np.full((len(y), len(x)), np.nan)
    stable = np.zeros((len(y), len(x)), dtype=bool)
    for idx, row in enumerate(result.rows):
        i, j = divmod(idx, len(y))  # axis1-major
        stable[j, i] = row.stable
        if row.stable:
            t_rise[j, i] = row.metrics.t_rise
    for row in result.rows:
        if row.valid and row.jury_stable and row.bounded is False:
            log.warning("jury-stable cell with unbounded simulation at %s", row.params)
    if not stable.any():
        warnings.warn("stability map: no stable cell, contour set is empty", RuntimeWarning,
                      stacklevel=2)
        return StabilityMap(result, x, y, t_rise, stable, [])
    if levels is None:
        levels = default_levels(t_rise)
    return StabilityMap(result, x, y, t_rise, stable, iso_contours(x, y, t_rise, levels))


@dataclass(frozen=True)
class Recommendation:
    window: tuple[float, float]
    best_ratio: float
    weights: tuple[float, float, float]
    ratios: tuple[float, ...]
    scores: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"window": list(self.window), "best_ratio": self.best_ratio,
                "weights": list(self.weights), "ratios": list(self.ratios),
                "scores": list(self.scores)}


def _minmax(v: np.ndarray) -> np.ndarray:
    span = v.max() - v.min()
    return np.zeros_like(v) if span == 0 else (v - v.min()) / span


def report_recommendation(result: SweepResult,
                          weights: Sequence[float] = (1.0, 1.0, 1.0),
                          tolerance: float = 0.1) -> Recommendation:
    """fs/F1 window minimizing a weighted sum of min-max normalized metrics.

    ``weights`` apply to (t_rise, ripple_pp, activity_per_second).  The window
    is the contiguous run of grid ratios around the best score whose score is
    within ``tolerance`` of the score range above the minimum.
    """
    w = tuple(float(x) for x in weights)
    if len(w) != 3 or any(x < 0 for x in w) or sum(w) == 0:
        raise ValidationError("weights must be three non-negative numbers, not all zero",
                              "weights")
    need = {"t_rise", "ripple_pp", "activity_per_second"}
    missing = need - set(result.spec.outputs)
    if missing:
        raise ValidationError(f"sweep lacks metric column(s) {sorted(missing)}", "outputs")
    usable = [r for r in result.rows if r.valid and r.metrics is not None
              and r.metrics.t_rise is not None]
    ratios = [r.fs_ratio for r in usable]
    if len(usable) < 2:
        raise ValidationError("recommendation needs at least two settled grid points", "rows")
    if len(set(ratios)) != len(ratios):
        raise ValidationError("recommendation needs a one-dimensional fs/F1 sweep", "axis1")
    order = np.argsort(ratios)
    ratio = np.asarray(ratios)[order]
    t_rise = np.asarray([usable[i].metrics.t_rise for i in order])
    ripple = np.asarray([usable[i].metrics.ripple_pp for i in order])
    act = np.asarray([usable[i].metrics.activity_per_second for i in order])
    score = (w[0] * _minmax(t_rise) + w[1] * _minmax(ripple) + w[2] * _minmax(act)) / sum(w)
    best = int(np.argmin(score))
    cut = score[best] + tolerance * (score.max() - score.min())
    lo = hi = best
    while lo > 0 and score[lo - 1] <= cut:
        lo -= 1
    while hi < len(score) - 1 and score[hi + 1] <= cut:
        hi += 1
    return Recommendation(window=(float(ratio[lo]), float(ratio[hi])),
                          best_ratio=float(ratio[best]), weights=w,
                          ratios=tuple(ratio.tolist()), scores=tuple(score.tolist()))
