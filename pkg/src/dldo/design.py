"""Regulator parameterization shared by every analysis view."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Any

# 128-device array delivering 3.5 mA at 0.7 V out of a 1 V supply.
DEFAULT_VDD = 1.0
DEFAULT_VREF = 0.7
DEFAULT_N_DEVICES = 128
DEFAULT_I_MAX = 3.5e-3
DEFAULT_C_LOAD = 1e-9
DEFAULT_I_LOAD = 1e-3
DEFAULT_FS = 50e6


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NumericalError(ArithmeticError):
    """Raised when a computation produces a non-finite result."""


class PlantMode(str, enum.Enum):
    CURRENT_SOURCE = "CurrentSource"
    RESISTIVE = "Resistive"


class EdgeMode(str, enum.Enum):
    SINGLE_EDGE = "SingleEdge"
    DUAL_EDGE = "DualEdge"

    @property
    def delay_fraction(self) -> float:
        """Sampling-to-actuation delay as a fraction of the clock period."""
        return 1.0 if self is EdgeMode.SINGLE_EDGE else 0.5


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a finite positive number, got {value!r}", name)


@dataclass(frozen=True)
class LdoDesign:
    """One regulator instance: electrical, clocking and loop-gain parameters.

    In ``Resistive`` plant mode every ON device is a resistor ``r_dev`` to
    ``vdd`` and ``i_dev`` is derived as ``(vdd - vref) / r_dev``.  In
    ``CurrentSource`` mode every ON device sources ``i_dev`` and ``r_dev`` is
    ignored.  ``r_pmos_eff`` may be left as ``None`` to derive it from the
    nominal operating point (see :attr:`pmos_resistance`).
    """

    vdd: float = DEFAULT_VDD
    vref: float = DEFAULT_VREF
    n_devices: int = DEFAULT_N_DEVICES
    i_dev: float | None = None
    r_dev: float | None = None
    plant_mode: PlantMode = PlantMode.RESISTIVE
    r_load: float = DEFAULT_VREF / DEFAULT_I_LOAD
    c_load: float = DEFAULT_C_LOAD
    r_pmos_eff: float | None = None
    fs: float = DEFAULT_FS
    k_forward: int = 1
    edge_mode: EdgeMode = EdgeMode.SINGLE_EDGE

    def __post_init__(self):
        object.__setattr__(self, "plant_mode", PlantMode(self.plant_mode))
        object.__setattr__(self, "edge_mode", EdgeMode(self.edge_mode))
        for name in ("vdd", "vref", "r_load", "c_load", "fs"):
            _positive(name, getattr(self, name))
        if not self.vref < self.vdd:
            raise ValidationError(f"vref ({self.vref}) must be below vdd ({self.vdd})", "vref")
        if int(self.n_devices) != self.n_devices or self.n_devices < 1:
            raise ValidationError(f"n_devices must be an integer >= 1, got {self.n_devices!r}",
                                  "n_devices")
        object.__setattr__(self, "n_devices", int(self.n_devices))
        if int(self.k_forward) != self.k_forward or not 1 <= self.k_forward <= 3:
            raise ValidationError(f"k_forward must be 1, 2 or 3, got {self.k_forward!r}",
                                  "k_forward")
        object.__setattr__(self, "k_forward", int(self.k_forward))
        if self.r_pmos_eff is not None:
            _positive("r_pmos_eff", self.r_pmos_eff)

        if self.plant_mode is PlantMode.RESISTIVE:
            if self.r_dev is None:
                raise ValidationError("r_dev is required in Resistive plant mode", "r_dev")
            _positive("r_dev", self.r_dev)
            object.__setattr__(self, "i_dev", (self.vdd - self.vref) / self.r_dev)
        else:
            if self.i_dev is None:
                raise ValidationError("i_dev is required in CurrentSource plant mode", "i_dev")
            _positive("i_dev", self.i_dev)
            if self.r_dev is not None:
                _positive("r_dev", self.r_dev)

    @property
    def t_sample(self) -> float:
        return 1.0 / self.fs

    @property
    def i_load_nominal(self) -> float:
        """Load current at the regulated reference (A)."""
        return self.vref / self.r_load

    @property
    def n_on_nominal(self) -> int:
        """Device count that carries the nominal load, rounded half-up, in [1, n_devices]."""
        n_on = math.floor(self.i_load_nominal / self.i_dev + 0.5)
        return min(max(n_on, 1), self.n_devices)

    @property
    def pmos_resistance(self) -> float:
        """Small-signal resistance of the array used in the load pole.

        An explicit ``r_pmos_eff`` wins.  Otherwise the resistive array is
        linearized at the nominal operating point, ``r_dev / n_on_nominal``,
        and an ideal current-source array contributes no conductance.
        """
        if self.r_pmos_eff is not None:
            return self.r_pmos_eff
        if self.plant_mode is PlantMode.CURRENT_SOURCE:
            return math.inf
        return self.r_dev / self.n_on_nominal

    @property
    def r_parallel(self) -> float:
        r_p = self.pmos_resistance
        if math.isinf(r_p):
            return self.r_load
        return self.r_load * r_p / (self.r_load + r_p)

    @property
    def load_pole(self) -> float:
        """F1 = 1 / ((r_load || r_pmos) * c_load) in s^-1."""
        return 1.0 / (self.r_parallel * self.c_load)

    @property
    def fs_ratio(self) -> float:
        """Canonical clock-to-load-pole ratio fs / F1 (= fs * tau_load)."""
        return self.fs / self.load_pole

    def replace(self, **changes: Any) -> "LdoDesign":
        # resistive i_dev is re-derived by __post_init__
        return dataclasses.replace(self, **changes)

    def with_fs_ratio(self, ratio: float, vary: str = "fs") -> "LdoDesign":
        """Return a copy whose fs/F1 equals ``ratio``.

        ``vary="fs"`` moves the clock with the load fixed.  ``vary="r_load"``
        holds the clock and searches the load resistance instead; with a
        derived ``r_pmos_eff`` the ratio is piecewise in ``r_load`` so the
        closest achievable value from above is returned.
        """
        _positive("fs_ratio", ratio)
        if vary == "fs":
            return self.replace(fs=ratio * self.load_pole)
        if vary != "r_load":
            raise ValidationError(f"vary must be 'fs' or 'r_load', got {vary!r}", "vary")

        def ratio_at(r_load: float) -> float:
            return self.replace(r_load=r_load).fs_ratio

        lo, hi = 1e-3, 1e9
        if not ratio_at(lo) < ratio < ratio_at(hi):
            raise ValidationError(f"fs_ratio {ratio} unreachable by varying r_load", "fs_ratio")
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if ratio_at(mid) < ratio:
                lo = mid
            else:
                hi = mid
            if hi / lo - 1.0 < 1e-13:
                break
        return self.replace(r_load=hi)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["plant_mode"] = self.plant_mode.value
        out["edge_mode"] = self.edge_mode.value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LdoDesign":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown design field(s): {sorted(unknown)}",
                                  sorted(unknown)[0])
        kwargs = dict(data)
        try:
            if "plant_mode" in kwargs:
                kwargs["plant_mode"] = PlantMode(kwargs["plant_mode"])
            if "edge_mode" in kwargs:
                kwargs["edge_mode"] = EdgeMode(kwargs["edge_mode"])
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        # unset resistive r_dev falls back to the default array
        if kwargs.get("plant_mode", PlantMode.RESISTIVE) is PlantMode.RESISTIVE:
            if kwargs.get("r_dev") is None:
                vdd = kwargs.get("vdd", DEFAULT_VDD)
                vref = kwargs.get("vref", DEFAULT_VREF)
                i_dev = kwargs.get("i_dev") or DEFAULT_I_MAX / kwargs.get("n_devices",
                                                                          DEFAULT_N_DEVICES)
                kwargs["r_dev"] = (vdd - vref) / i_dev
            kwargs.pop("i_dev", None)
        return cls(**kwargs)


def default_design(**overrides: Any) -> LdoDesign:
    """Baseline 128-device regulator at a 1 mA load and 50 MHz clock.

    ``i_dev = 3.5 mA / 128`` and ``r_dev = 0.3 V / i_dev`` (about 10.97 kOhm).
    """
    n = overrides.get("n_devices", DEFAULT_N_DEVICES)
    # a bad n_devices is reported by LdoDesign validation, not here
    i_dev = DEFAULT_I_MAX / (n if isinstance(n, (int, float)) and n >= 1 else DEFAULT_N_DEVICES)
    base: dict[str, Any] = dict(
        vdd=DEFAULT_VDD,
        vref=DEFAULT_VREF,
        n_devices=n,
        r_dev=(DEFAULT_VDD - DEFAULT_VREF) / i_dev,
        plant_mode=PlantMode.RESISTIVE,
        r_load=DEFAULT_VREF / DEFAULT_I_LOAD,
        c_load=DEFAULT_C_LOAD,
        fs=DEFAULT_FS,
        k_forward=1,
        edge_mode=EdgeMode.SINGLE_EDGE,
    )
    if PlantMode(overrides.get("plant_mode", PlantMode.RESISTIVE)) is PlantMode.CURRENT_SOURCE:
        base["i_dev"] = i_dev
    base.update(overrides)
    return LdoDesign(**base)
