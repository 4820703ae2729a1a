"""Cycle-accurate nonlinear simulation of the regulator loop.

Every clock edge the comparator samples ``v_out`` against ``vref`` and the
barrel shifter moves the thermometer word by ``+/- k_forward`` (saturating at
0 and ``n_devices``).  Between actuation instants the output node is a linear
RC circuit driven by a constant word, so it is advanced with its exact
exponential solution.  No ODE solver is involved.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design import LdoDesign, PlantMode, EdgeMode, ValidationError


class EventKind(str, enum.Enum):
    LOAD_STEP = "LoadStep"
    REFERENCE_STEP = "ReferenceStep"


@dataclass(frozen=True)
class Event:
    """A parameter change at ``time``: new ``r_load`` (LoadStep) or new ``vref``."""

    time: float
    kind: EventKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValidationError(f"event time must be >= 0, got {self.time}", "time")
        if not (math.isfinite(self.value) and self.value > 0):
            raise ValidationError(f"event value must be positive, got {self.value}", "value")

    @classmethod
    def load_step(cls, time: float, r_load: float) -> "Event":
        return cls(time, EventKind.LOAD_STEP, r_load)

    @classmethod
    def load_current_step(cls, time: float, i_load: float, vref: float) -> "Event":
        """Load step expressed as a current, modeled as ``r_load = vref / i_load``."""
        return cls(time, EventKind.LOAD_STEP, vref / i_load)

    @classmethod
    def reference_step(cls, time: float, vref: float) -> "Event":
        return cls(time, EventKind.REFERENCE_STEP, vref)

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind.value, "value": self.value}


@dataclass(frozen=True)
class SimScenario:
    design: LdoDesign
    v_out_initial: float = 0.0
    d_initial: int = 0
    duration_cycles: int = 4096
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if int(self.duration_cycles) != self.duration_cycles or self.duration_cycles <= 0:
            raise ValidationError("duration_cycles must be a positive integer",
                                  "duration_cycles")
        object.__setattr__(self, "duration_cycles", int(self.duration_cycles))
        if int(self.d_initial) != self.d_initial or not 0 <= self.d_initial <= self.design.n_devices:
            raise ValidationError(
                f"d_initial must be an integer in [0, {self.design.n_devices}]", "d_initial")
        object.__setattr__(self, "d_initial", int(self.d_initial))
        if not math.isfinite(self.v_out_initial):
            raise ValidationError("v_out_initial must be finite", "v_out_initial")
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValidationError("events must be sorted by time", "events")
        if times and times[-1] > self.duration:
            raise ValidationError("event time beyond the simulated duration", "events")

    @property
    def duration(self) -> float:
        return self.duration_cycles * self.design.t_sample

    @property
    def final_vref(self) -> float:
        vref = self.design.vref
        for e in self.events:
            if e.kind is EventKind.REFERENCE_STEP:
                vref = e.value
        return vref

    def replace_design(self, design: LdoDesign) -> "SimScenario":
        return SimScenario(design, self.v_out_initial, self.d_initial,
                           self.duration_cycles, self.events)


@dataclass
class Segments:
    """Affine-RC pieces: ``v(t0 + s) = v_ss + (v0 - v_ss) exp(-s / tau)`` for s in [0, dt]."""

    t0: np.ndarray
    dt: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    v_ss: np.ndarray
    tau: np.ndarray
    d_word: np.ndarray
    r_load: np.ndarray

    def __len__(self) -> int:
        return len(self.t0)


@dataclass
class SimTrace:
    """Per-clock record of one simulation.

    ``t``, ``v_out``, ``d_word`` and ``comparator`` hold one entry per sampling
    edge; ``d_word`` is the word driving the array at that instant.
    ``segments`` hold every exact inter-breakpoint piece of the waveform.
    """

    t: np.ndarray
    v_out: np.ndarray
    d_word: np.ndarray
    comparator: np.ndarray
    segments: Segments
    activity: int
    t_end: float
    vref_final: float
    t_sample: float
    design: LdoDesign | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dense_t(self) -> np.ndarray:
        """Checkpoint times: every segment start plus the final instant."""
        return np.append(self.segments.t0, self.t_end)

    @property
    def dense_v(self) -> np.ndarray:
        s = self.segments
        return np.append(s.v0, s.v1[-1] if len(s) else np.nan)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "v_out_V", "d_word", "comparator"])
            for row in zip(self.t.tolist(), self.v_out.tolist(),
                           self.d_word.tolist(), self.comparator.tolist()):
                w.writerow([repr(row[0]), repr(row[1]), row[2], row[3]])

    def write_dense_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "v_out_V"])
            for t, v in zip(self.dense_t.tolist(), self.dense_v.tolist()):
                w.writerow([repr(t), repr(v)])


def plant_params(design: LdoDesign, d_word: int, r_load: float) -> tuple[float, float]:
    """``(v_ss, tau)`` of the output node for a held word and load."""
    if design.plant_mode is PlantMode.CURRENT_SOURCE:
        return d_word * design.i_dev * r_load, r_load * design.c_load
    g = 1.0 / r_load + d_word / design.r_dev
    return (d_word * design.vdd / design.r_dev) / g, design.c_load / g


def simulate(scenario: SimScenario) -> SimTrace:
    """Run ``scenario`` cycle by cycle.

    Sampling edge k is at ``t = k T``; the comparator emits +1 when
    ``v_out < vref`` and -1 otherwise (a tie counts as "not below").  The
    updated word is applied at ``(k + 1) T`` for single-edge clocking or at
    ``(k + 1/2) T`` for dual-edge clocking.  Events take effect at their
    timestamp, before a sample taken at the same instant.
    """
    design = scenario.design
    n_cyc = scenario.duration_cycles
    T = design.t_sample
    kf = design.k_forward
    n_dev = design.n_devices
    half = design.edge_mode is EdgeMode.DUAL_EDGE
    current_source = design.plant_mode is PlantMode.CURRENT_SOURCE
    i_dev, r_dev, vdd, c_load = design.i_dev, design.r_dev, design.vdd, design.c_load
    exp = math.exp

    events = list(scenario.events)
    ei = 0
    r_load = design.r_load
    vref = design.vref
    v = float(scenario.v_out_initial)
    d = scenario.d_initial
    t = 0.0

    ts = np.empty(n_cyc)
    vs = np.empty(n_cyc)
    ds = np.empty(n_cyc, dtype=np.int64)
    cs = np.empty(n_cyc, dtype=np.int8)
    seg_t0: list[float] = []
    seg_dt: list[float] = []
    seg_v0: list[float] = []
    seg_v1: list[float] = []
    seg_vss: list[float] = []
    seg_tau: list[float] = []
    seg_d: list[int] = []
    seg_rl: list[float] = []
    toggles = 0

    def advance(v: float, t: float, t_target: float) -> float:
        nonlocal ei, r_load, vref
        while True:
            t_stop = t_target
            if ei < len(events) and events[ei].time < t_target:
                t_stop = events[ei].time
            if t_stop > t:
                if current_source:
                    tau = r_load * c_load
                    vss = d * i_dev * r_load
                else:
                    g = 1.0 / r_load + d / r_dev
                    tau = c_load / g
                    vss = (d * vdd / r_dev) / g
                dt = t_stop - t
                v1 = vss + (v - vss) * exp(-dt / tau)
                seg_t0.append(t)
                seg_dt.append(dt)
                seg_v0.append(v)
                seg_v1.append(v1)
                seg_vss.append(vss)
                seg_tau.append(tau)
                seg_d.append(d)
                seg_rl.append(r_load)
                v, t = v1, t_stop
            if t_stop == t_target:
                break
            ev = events[ei]
            ei += 1
            if ev.kind is EventKind.LOAD_STEP:
                r_load = ev.value
            else:
                vref = ev.value
        # events stamped exactly at the target apply before the next sample
        while ei < len(events) and events[ei].time <= t_target:
            ev = events[ei]
            ei += 1
            if ev.kind is EventKind.LOAD_STEP:
                r_load = ev.value
            else:
                vref = ev.value
        return v

    v = advance(v, t, 0.0)
    for k in range(n_cyc):
        tk = k * T
        c = 1 if v < vref else -1
        ts[k] = tk
        vs[k] = v
        ds[k] = d
        cs[k] = c
        d_new = d + c * kf
        if d_new < 0:
            d_new = 0
        elif d_new > n_dev:
            d_new = n_dev
        t_next = (k + 1) * T
        if half:
            t_act = (k + 0.5) * T
            v = advance(v, tk, t_act)
            toggles += abs(d_new - d)
            d = d_new
            v = advance(v, t_act, t_next)
        else:
            v = advance(v, tk, t_next)
            toggles += abs(d_new - d)
            d = d_new

    segments = Segments(
        t0=np.asarray(seg_t0), dt=np.asarray(seg_dt), v0=np.asarray(seg_v0),
        v1=np.asarray(seg_v1), v_ss=np.asarray(seg_vss), tau=np.asarray(seg_tau),
        d_word=np.asarray(seg_d, dtype=np.int64), r_load=np.asarray(seg_rl),
    )
    return SimTrace(t=ts, v_out=vs, d_word=ds, comparator=cs, segments=segments,
                    activity=n_cyc + toggles, t_end=n_cyc * T, vref_final=vref,
                    t_sample=T, design=design)
