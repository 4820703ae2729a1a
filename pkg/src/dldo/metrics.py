"""Transient and steady-state metrics extracted from a :class:`SimTrace`."""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .design import LdoDesign, ValidationError
from .linmodel import overshoot_to_pm
from .loopsim import SimTrace

SETTLE_BAND = 0.05
SETTLE_HOLD = 32
STEADY_FRACTION = 0.25
STEADY_MIN = 256
MIN_MODE_SEQUENCE = 64


class ModeKind(str, enum.Enum):
    PURE = "Pure"
    MIXED = "Mixed"
    NONE = "None"


@dataclass(frozen=True)
class ModeLabel:
    """Steady-state comparator pattern.

    ``runs`` is the cyclic run-length word of one period, starting with a
    run of +1.  A pure mode-n has ``runs == (n, n)``.
    """

    kind: ModeKind
    n: int | None = None
    runs: tuple[int, ...] = ()

    @classmethod
    def pure(cls, n: int) -> "ModeLabel":
        return cls(ModeKind.PURE, n, (n, n))

    @classmethod
    def none(cls) -> "ModeLabel":
        return cls(ModeKind.NONE)

    @property
    def modes(self) -> tuple[int, ...]:
        """Distinct run lengths, i.e. the modes present in a mixed cycle."""
        return tuple(sorted(set(self.runs)))

    @property
    def order(self) -> int | None:
        """Largest mode present, or None when there is no limit cycle."""
        if self.kind is ModeKind.PURE:
            return self.n
        if self.kind is ModeKind.MIXED:
            return max(self.runs)
        return None

    def __str__(self) -> str:
        if self.kind is ModeKind.PURE:
            return f"Pure({self.n})"
        if self.kind is ModeKind.MIXED:
            return "Mixed(" + " ".join(map(str, self.runs)) + ")"
        return "None"


def _cyclic_runs(word: np.ndarray) -> tuple[int, ...]:
    """Run lengths of a periodic word, rotated to start at the first +1 run."""
    p = len(word)
    changes = np.flatnonzero(word != np.roll(word, 1))
    if len(changes) == 0:
        return ()
    starts = [int(i) for i in changes if word[i] > 0]
    start = starts[0]
    w = np.roll(word, -start)
    bounds = np.flatnonzero(w != np.roll(w, 1)).tolist() + [p]
    return tuple(b - a for a, b in zip(bounds[:-1], bounds[1:]))


def detect_mode(comparator_seq: Sequence[int]) -> ModeLabel:
    """Classify a steady-state comparator sequence.

    Looks for the smallest exact period ``p <= len/4``.  A periodic word of n
    (+1) followed by n (-1), up to rotation, is ``Pure(n)``; any other
    periodic word is ``Mixed`` with its run lengths.  Aperiodic sequences and
    constant ones (a railed word, no oscillation) are ``None``.
    """
    s = np.asarray(comparator_seq)
    if s.ndim != 1 or len(s) < MIN_MODE_SEQUENCE:
        raise ValidationError(
            f"mode detection needs at least {MIN_MODE_SEQUENCE} samples, got {len(s)}",
            "comparator_seq")
    if not np.all(np.isin(s, (-1, 1))):
        raise ValidationError("comparator samples must be +1 or -1", "comparator_seq")
    length = len(s)
    for p in range(1, length // 4 + 1):
        if np.array_equal(s[p:], s[:-p]):
            runs = _cyclic_runs(s[-p:])
            if not runs:
                return ModeLabel.none()
            if len(runs) == 2 and runs[0] == runs[1]:
                return ModeLabel.pure(runs[0])
            return ModeLabel(ModeKind.MIXED, None, runs)
    return ModeLabel.none()


@dataclass(frozen=True)
class Metrics:
    t_rise: float | None
    overshoot_fraction: float
    pm_estimate: float | None
    ripple_pp: float
    detected_mode: ModeLabel
    activity_per_second: float
    v_final: float
    settled: bool

    def to_dict(self) -> dict:
        return {
            "t_rise": self.t_rise,
            "overshoot_fraction": self.overshoot_fraction,
            "pm_estimate": self.pm_estimate,
            "ripple_pp": self.ripple_pp,
            "detected_mode": str(self.detected_mode),
            "mode_order": self.detected_mode.order,
            "activity_per_second": self.activity_per_second,
            "v_final": self.v_final,
            "settled": self.settled,
        }


def steady_window(n_samples: int) -> int:
    """Sample count of the steady-state tail: last 25 %, at least 256 (capped at the trace)."""
    return min(n_samples, max(n_samples // 4, STEADY_MIN))


def _band_entry_time(trace: SimTrace, target: float) -> float | None:
    """Instant the output enters the settling band and stays for the hold window."""
    band = SETTLE_BAND * target
    dt_ = trace.dense_t
    dv = trace.dense_v
    inside = np.abs(dv - target) <= band
    hold = (SETTLE_HOLD - 1) * trace.t_sample
    # each segment is monotone, so endpoint membership decides the whole segment
    n = len(inside)
    next_out = np.empty(n, dtype=np.int64)
    nxt = n
    for i in range(n - 1, -1, -1):
        if not inside[i]:
            nxt = i
        next_out[i] = nxt
    last_t = dt_[-1]
    for j in range(n):
        if not inside[j] or (j > 0 and inside[j - 1]):
            continue
        end_t = dt_[next_out[j] - 1] if next_out[j] < n else last_t
        if end_t - dt_[j] >= hold:
            if j == 0:
                return float(dt_[0])
            seg = trace.segments
            k = j - 1
            v0, vss, tau = seg.v0[k], seg.v_ss[k], seg.tau[k]
            edge = target - band if v0 < target else target + band
            ratio = (v0 - vss) / (edge - vss)
            if ratio <= 0 or not math.isfinite(ratio):
                return float(dt_[j])
            s = tau * math.log(ratio)
            return float(seg.t0[k] + min(max(s, 0.0), seg.dt[k]))
    return None


def measure(trace: SimTrace, design: LdoDesign | None = None) -> Metrics:
    """Rise time, overshoot, PM estimate, ripple, mode and activity rate of a trace.

    ``t_rise`` is the instant the output enters ``vref +/- 5 %`` and stays
    there for 32 consecutive clock samples; ``None`` when it never does.
    Overshoot is measured after the first ``vref`` crossing against the mean
    of the steady-state window.  ``design``, when given, is checked against the
    trace's word range.
    """
    if len(trace) == 0:
        raise ValidationError("empty trace", "trace")
    if len(trace) < MIN_MODE_SEQUENCE:
        raise ValidationError(f"trace shorter than {MIN_MODE_SEQUENCE} samples", "trace")
    if design is not None and (trace.d_word.min() < 0 or trace.d_word.max() > design.n_devices):
        raise ValidationError("trace word outside [0, n_devices] for this design", "trace")
    target = trace.vref_final
    n_ss = steady_window(len(trace))
    t_ss0 = trace.t[-n_ss]

    v_final = float(np.mean(trace.v_out[-n_ss:]))
    dt_, dv = trace.dense_t, trace.dense_v
    in_ss = dt_ >= t_ss0
    ripple = float(np.max(dv[in_ss]) - np.min(dv[in_ss]))

    crossed = np.flatnonzero(dv >= target)
    if len(crossed) and v_final > 0:
        peak = float(np.max(dv[crossed[0]:]))
        overshoot = max((peak - v_final) / v_final, 0.0)
    else:
        overshoot = 0.0
    pm = overshoot_to_pm(overshoot)[1] if 0.0 < overshoot < 1.0 else None

    t_rise = _band_entry_time(trace, target)
    mode = detect_mode(trace.comparator[-n_ss:])
    return Metrics(
        t_rise=t_rise,
        overshoot_fraction=overshoot,
        pm_estimate=pm,
        ripple_pp=ripple,
        detected_mode=mode,
        activity_per_second=trace.activity / trace.t_end,
        v_final=v_final,
        settled=t_rise is not None,
    )
