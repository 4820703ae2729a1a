"""Sampled describing-function analysis of the regulator's limit cycles.

A mode-n limit cycle has the comparator emit n samples of +1 followed by n of
-1, so the relay output is an impulse train of period ``2 n T`` whose
fundamental sits at ``omega = omega_s / (2 n) = pi / (n T)``.  With the relay
input modeled as ``x(t) = A sin(omega t + phi)`` (a sampling instant at the
origin), the pattern is only consistent for ``0 < phi < 180/n`` degrees.  The
harmonic balance ``N(A, phi) L(j omega) = -1`` then fixes ``phi`` from the
phase of the linear part and ``A`` from its magnitude.
"""

from __future__ import annotations

import cmath
import csv
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import EdgeMode, LdoDesign, ValidationError
from .linmodel import ClosedLoopModel, build_model
from .loopsim import SimScenario, simulate
from .metrics import ModeLabel, detect_mode, steady_window

# boundary solutions closer than this to the phase bracket count as absent
PHASE_EDGE_TOL_DEG = 1e-9


def _delay(edge_mode: EdgeMode | str, t_sample: float, extra_delay: float) -> float:
    return EdgeMode(edge_mode).delay_fraction * t_sample + extra_delay


def relay_fundamental(n: int, fs: float) -> complex:
    """Fundamental phasor of one period of the sampled mode-n relay output.

    ``c1 = (2 / Tc) * sum_k y_k exp(-j omega k T)`` over ``k = 0 .. 2n-1``
    (sample 0 included, sample 2n excluded), unit relay amplitude.  The
    phasor is cosine-referenced: the fundamental is ``|c1| cos(omega t + arg c1)``.
    """
    if int(n) != n or n < 1:
        raise ValidationError("mode index n must be an integer >= 1", "n")
    if not fs > 0:
        raise ValidationError("fs must be positive", "fs")
    n = int(n)
    T = 1.0 / fs
    omega = math.pi / (n * T)
    k = np.arange(2 * n)
    y = np.where(k < n, 1.0, -1.0)
    total = np.sum(y * np.exp(-1j * omega * k * T))
    return complex(2.0 / (2 * n * T) * total)


def linear_blocks(n: int, model: ClosedLoopModel, edge_mode: EdgeMode | str,
                  extra_delay: float = 0.0) -> dict[str, complex]:
    """Each factor of the linear part at ``omega = pi / (n T)``, uncancelled.

    ``integrator`` and ``load`` carry the loop drive ``k_forward * k_out`` between them.
    """
    T = model.t_sample
    w = math.pi / (n * T)
    z_inv = cmath.exp(-1j * w * T)
    mag = 1.0 / math.sqrt(1.0 + (w / model.f1) ** 2)
    return {
        "integrator": 1.0 / (1.0 - z_inv),
        "delay": cmath.exp(-1j * w * _delay(edge_mode, T, extra_delay)),
        "zoh": (1.0 - z_inv) / (1j * w),
        "load": model.loop_drive / model.f1 * mag * cmath.exp(-1j * math.atan(w / model.f1)),
    }


def linear_response(n: int, model: ClosedLoopModel, edge_mode: EdgeMode | str,
                    extra_delay: float = 0.0) -> complex:
    """Linear part of the loop from relay impulses to ``v_out`` at ``omega_s / (2n)``.

    The ZOH numerator cancels the integrator denominator, leaving
    ``k_forward k_out exp(-j omega T_d) / (j omega (f1 + j omega))`` with
    ``T_d = T`` (single edge) or ``T/2`` (dual edge), plus ``extra_delay``.
    """
    if int(n) != n or n < 1:
        raise ValidationError("mode index n must be an integer >= 1", "n")
    T = model.t_sample
    w = math.pi / (int(n) * T)
    # omega = pi/(nT) never reaches the integrator pole at omega = 2 pi / T
    assert abs(1.0 - cmath.exp(-1j * w * T)) > 0.0
    td = _delay(edge_mode, T, extra_delay)
    return model.loop_drive * cmath.exp(-1j * w * td) / (1j * w * (model.f1 + 1j * w))


@dataclass(frozen=True)
class ModePrediction:
    n: int
    exists: bool
    phi_deg: float
    ripple_amplitude: float
    omega_osc: float
    loop_gain_db: float
    phase_ok: bool = True

    def to_row(self, ratio: float, edge_mode: EdgeMode | str) -> list:
        return [ratio, EdgeMode(edge_mode).value, self.n, "true" if self.exists else "false",
                self.phi_deg, self.ripple_amplitude, self.loop_gain_db]


def _wrap_deg(x: float) -> float:
    """Wrap to (-180, 180]."""
    y = math.fmod(x, 360.0)
    if y <= -180.0:
        y += 360.0
    elif y > 180.0:
        y -= 360.0
    return y


def mode_exists(n: int, model: ClosedLoopModel, edge_mode: EdgeMode | str,
                extra_delay: float = 0.0) -> ModePrediction:
    """Describing-function verdict for a mode-n limit cycle.

    Relative to ``x = A sin(omega t + phi)`` the relay's describing function
    has phase ``arg(c1) + 90 - phi`` degrees, so the phase balance gives
    ``phi = arg(c1) + 90 + arg(L) + 180`` (mod 360).  The magnitude balance
    gives ``A = |c1| |L|``.  The mode must also be resolvable by the
    quantized loop: ``loop_gain_db`` compares ``A`` with half of the output
    change caused by one actuation step and must be non-negative.
    """
    if int(n) != n or n < 1:
        raise ValidationError("mode index n must be an integer >= 1", "n")
    n = int(n)
    fs = 1.0 / model.t_sample
    c1 = relay_fundamental(n, fs)
    L = linear_response(n, model, edge_mode, extra_delay)
    phi = _wrap_deg(math.degrees(cmath.phase(c1)) + 90.0 + math.degrees(cmath.phase(L)) + 180.0)
    amplitude = abs(c1) * abs(L)
    a_min = 0.5 * model.device_step
    if amplitude > 0 and math.isfinite(amplitude) and a_min > 0:
        gain_db = 20.0 * math.log10(amplitude / a_min)
    else:
        gain_db = -math.inf
    phase_ok = PHASE_EDGE_TOL_DEG < phi < 180.0 / n - PHASE_EDGE_TOL_DEG
    exists = phase_ok and amplitude > 0 and math.isfinite(amplitude) and gain_db >= 0.0
    return ModePrediction(n=n, exists=exists, phi_deg=phi, ripple_amplitude=amplitude,
                          omega_osc=math.pi * fs / n, loop_gain_db=gain_db, phase_ok=phase_ok)


@dataclass
class ModeMap:
    ratio_grid: list[float]
    edge_mode: EdgeMode
    predictions: list[list[ModePrediction]]
    simulated: list[ModeLabel] | None = None
    n_max: int = 0

    @property
    def predicted(self) -> list[tuple[int, ...]]:
        """Feasible mode set per ratio."""
        return [tuple(p.n for p in row if p.exists) for row in self.predictions]

    @property
    def max_mode(self) -> list[int]:
        """Largest feasible mode per ratio, 0 where none is feasible."""
        return [max(s) if s else 0 for s in self.predicted]

    def band(self, n: int) -> tuple[float, float] | None:
        """Smallest and largest grid ratio at which mode ``n`` is predicted."""
        hits = [r for r, s in zip(self.ratio_grid, self.predicted) if n in s]
        return (min(hits), max(hits)) if hits else None

    def prediction(self, ratio_index: int, n: int) -> ModePrediction:
        return self.predictions[ratio_index][n - 1]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ratio", "edge_mode", "n", "exists", "phi_deg", "amplitude_V", "gain_db"])
            for ratio, row in zip(self.ratio_grid, self.predictions):
                for p in row:
                    w.writerow(p.to_row(ratio, self.edge_mode))

    def write_summary_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ratio", "max_mode_predicted", "mode_simulated"])
            sims = self.simulated or [None] * len(self.ratio_grid)
            for ratio, m, s in zip(self.ratio_grid, self.max_mode, sims):
                w.writerow([ratio, m, "" if s is None else str(s)])


def design_family(design: LdoDesign, vary: str = "fs") -> Callable[[float], ClosedLoopModel]:
    """Map an fs/F1 ratio to the linearized model of ``design`` retuned to it."""
    def family(ratio: float) -> ClosedLoopModel:
        return build_model(design.with_fs_ratio(ratio, vary))
    return family


def simulated_mode(design: LdoDesign, scenario: SimScenario | None = None) -> ModeLabel:
    """Steady-state mode loop-sim reaches for ``design``."""
    if scenario is None:
        scenario = SimScenario(design)
    else:
        scenario = scenario.replace_design(design)
    trace = simulate(scenario)
    return detect_mode(trace.comparator[-steady_window(len(trace)):])


def mode_map(model_family: Callable[[float], ClosedLoopModel], ratios: Sequence[float],
             n_max: int, edge_mode: EdgeMode | str,
             simulated: Sequence[ModeLabel] | None = None) -> ModeMap:
    """Predicted feasible modes ``n <= n_max`` at every ratio of a strictly increasing grid."""
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ValidationError("ratio grid must be nonempty", "ratios")
    if any(b <= a for a, b in zip(ratios[:-1], ratios[1:])):
        raise ValidationError("ratio grid must be strictly increasing", "ratios")
    if int(n_max) != n_max or n_max < 1:
        raise ValidationError("n_max must be an integer >= 1", "n_max")
    if simulated is not None and len(simulated) != len(ratios):
        raise ValidationError("simulated labels must match the ratio grid", "simulated")
    edge_mode = EdgeMode(edge_mode)
    predictions = []
    for r in ratios:
        model = model_family(r)
        predictions.append([mode_exists(n, model, edge_mode) for n in range(1, int(n_max) + 1)])
    return ModeMap(ratio_grid=ratios, edge_mode=edge_mode, predictions=predictions,
                   simulated=list(simulated) if simulated is not None else None,
                   n_max=int(n_max))


def design_mode_map(design: LdoDesign, ratios: Sequence[float], n_max: int,
                    edge_mode: EdgeMode | str | None = None, vary: str = "fs",
                    scenario: SimScenario | None = None,
                    with_simulation: bool = False) -> ModeMap:
    """:func:`mode_map` for one design, optionally cross-populated from loop-sim."""
    edge_mode = EdgeMode(edge_mode or design.edge_mode)
    base = design.replace(edge_mode=edge_mode)
    sims = None
    if with_simulation:
        sims = [simulated_mode(base.with_fs_ratio(r, vary), scenario) for r in ratios]
    return mode_map(design_family(base, vary), ratios, n_max, edge_mode, sims)
