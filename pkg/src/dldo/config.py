"""JSON configuration: ``design``, ``scenario`` and ``sweep`` sections in SI units.

Example::

    {
      "design": {"fs": 5e7, "k_forward": 2},
      "scenario": {"duration_cycles": 4096,
                   "events": [{"time": 0.0, "kind": "LoadStep", "value": 291.67}]},
      "sweep": {"axis1": {"name": "fs_ratio", "start": 2, "stop": 20, "num": 19},
                "axis2": {"name": "k_forward", "values": [1, 2, 3]}}
    }

Missing design fields take the defaults of :func:`default_design`.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .design import LdoDesign, ValidationError, default_design
from .explorer import METRIC_NAMES, SweepAxis, SweepSpec
from .loopsim import Event, SimScenario

TOP_LEVEL_KEYS = ("design", "scenario", "sweep")
SCENARIO_KEYS = ("v_out_initial", "d_initial", "duration_cycles", "events")
SWEEP_KEYS = ("axis1", "axis2", "outputs", "vary", "n_max", "workers",
              "weights", "tolerance", "levels", "k_max", "steps", "ratios", "edge_modes")

# default design-space grid: fs/F1 over [2, 20] against every barrel-shifter step
DEFAULT_SWEEP: dict[str, Any] = {
    "axis1": {"name": "fs_ratio", "start": 2.0, "stop": 20.0, "num": 19},
    "axis2": None,
    "outputs": list(METRIC_NAMES),
    "vary": "fs",
    "n_max": 64,
    "workers": 1,
    "weights": [1.0, 1.0, 1.0],
    "tolerance": 0.1,
    "levels": None,
    "k_max": 1.5,
    "steps": 301,
    "ratios": {"start": 1.0, "stop": 30.0, "num": 30},
    "edge_modes": ["SingleEdge", "DualEdge"],
}
DEFAULT_MAP_AXIS2 = {"name": "k_forward", "values": [1, 2, 3]}


def _unknown(section: str, got: dict, allowed) -> None:
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ValidationError(f"unknown key(s) in {section}: {extra}", extra[0])


def grid_values(spec: dict | list) -> list[float]:
    """Grid from ``{"values": [...]}``, ``{"start", "stop", "num"}`` or ``{"start", "stop", "step"}``."""
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if not isinstance(spec, dict):
        raise ValidationError("grid must be a list or an object", "grid")
    if "values" in spec:
        return [float(v) for v in spec["values"]]
    try:
        start, stop = float(spec["start"]), float(spec["stop"])
    except KeyError as exc:
        raise ValidationError(f"grid needs 'values' or 'start'/'stop', missing {exc}",
                              "grid") from None
    if "num" in spec:
        num = int(spec["num"])
        if num < 1:
            raise ValidationError("grid num must be >= 1", "num")
        return [float(v) for v in np.linspace(start, stop, num)]
    if "step" in spec:
        step = float(spec["step"])
        if not step > 0:
            raise ValidationError("grid step must be positive", "step")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    raise ValidationError("grid needs 'num' or 'step'", "grid")


def _axis(spec: dict | None) -> SweepAxis | None:
    if spec is None:
        return None
    if not isinstance(spec, dict) or "name" not in spec:
        raise ValidationError("axis needs a 'name'", "name")
    _unknown("axis", spec, ("name", "values", "start", "stop", "num", "step"))
    return SweepAxis(spec["name"], tuple(grid_values(spec)))


def scenario_from_dict(design: LdoDesign, data: dict) -> SimScenario:
    _unknown("scenario", data, SCENARIO_KEYS)
    events = []
    for ev in data.get("events", []):
        if not isinstance(ev, dict):
            raise ValidationError("each event must be an object", "events")
        _unknown("event", ev, ("time", "kind", "value"))
        try:
            events.append(Event(float(ev["time"]), ev["kind"], float(ev["value"])))
        except KeyError as exc:
            raise ValidationError(f"event missing {exc}", "events") from None
        except ValueError as exc:
            raise ValidationError(str(exc), "events") from None
    return SimScenario(
        design=design,
        v_out_initial=float(data.get("v_out_initial", 0.0)),
        d_initial=data.get("d_initial", 0),
        duration_cycles=data.get("duration_cycles", 4096),
        events=tuple(events),
    )


def scenario_to_dict(scenario: SimScenario) -> dict:
    return {"v_out_initial": scenario.v_out_initial, "d_initial": scenario.d_initial,
            "duration_cycles": scenario.duration_cycles,
            "events": [e.to_dict() for e in scenario.events]}


@dataclass
class Config:
    design: LdoDesign
    scenario: SimScenario
    sweep: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_SWEEP))

    def sweep_spec(self, two_axes: bool = False) -> SweepSpec:
        """SweepSpec from the sweep section; ``two_axes`` fills in the default map axis."""
        axis2 = self.sweep.get("axis2")
        if two_axes and axis2 is None:
            axis2 = DEFAULT_MAP_AXIS2
        return SweepSpec(
            base_design=self.design,
            axis1=_axis(self.sweep["axis1"]),
            axis2=_axis(axis2),
            scenario_template=self.scenario,
            outputs=tuple(self.sweep["outputs"]),
            vary=self.sweep["vary"],
            n_max=int(self.sweep["n_max"]),
            workers=int(self.sweep["workers"]),
        )

    def to_dict(self) -> dict:
        return {"design": self.design.to_dict(), "scenario": scenario_to_dict(self.scenario),
                "sweep": self.sweep}


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object", "config")
    _unknown("config", data, TOP_LEVEL_KEYS)
    design_data = data.get("design") or {}
    if not isinstance(design_data, dict):
        raise ValidationError("design must be an object", "design")
    known = {f.name for f in dataclasses.fields(LdoDesign)}
    _unknown("design", design_data, known)
    design = default_design(**design_data)
    scenario = scenario_from_dict(design, data.get("scenario") or {})
    sweep_data = data.get("sweep") or {}
    if not isinstance(sweep_data, dict):
        raise ValidationError("sweep must be an object", "sweep")
    _unknown("sweep", sweep_data, SWEEP_KEYS)
    sweep = dict(DEFAULT_SWEEP)
    sweep.update(sweep_data)
    return Config(design=design, scenario=scenario, sweep=sweep)


def load_config(path: str | Path | None) -> Config:
    """Parse a config file; ``None`` yields the all-defaults config."""
    if path is None:
        return config_from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}", "config") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}", "config") from None
    return config_from_dict(data)
