"""Modeling lab for an all-digital, discrete-time LDO regulator.

The package is split along the loop's analysis views:

* :mod:`dldo.design` -- regulator parameterization and validation.
* :mod:`dldo.linmodel` -- second-order z-domain small-signal model.
* :mod:`dldo.loopsim` -- cycle-accurate nonlinear loop simulation.
* :mod:`dldo.metrics` -- transient/steady-state metrics and mode detection.
* :mod:`dldo.limitcycle` -- sampled describing-function mode analysis.
* :mod:`dldo.explorer` -- parameter sweeps, stability map, recommendation.
* :mod:`dldo.config` -- JSON configuration loading.
* :mod:`dldo.cli` -- the ``dldo`` command.
"""

from .design import (
    EdgeMode,
    LdoDesign,
    NumericalError,
    PlantMode,
    ValidationError,
    default_design,
)
from .linmodel import (
    ClosedLoopModel,
    RootLocus,
    StepResponse,
    build_model,
    closed_loop_poles,
    jury_stable,
    linear_step_response,
    overshoot_to_pm,
    root_locus,
)
from .loopsim import Event, EventKind, SimScenario, SimTrace, simulate
from .metrics import Metrics, ModeKind, ModeLabel, detect_mode, measure
from .limitcycle import (
    ModeMap,
    ModePrediction,
    linear_response,
    mode_exists,
    mode_map,
    relay_fundamental,
)
from .explorer import (
    Recommendation,
    StabilityMap,
    SweepAxis,
    SweepResult,
    SweepRow,
    SweepSpec,
    report_recommendation,
    run_sweep,
    stability_map,
)
from .config import Config, load_config

__version__ = "0.1.0"

__all__ = [
    "ClosedLoopModel",
    "Config",
    "Recommendation",
    "StabilityMap",
    "SweepAxis",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "load_config",
    "report_recommendation",
    "run_sweep",
    "stability_map",
    "EdgeMode",
    "Event",
    "EventKind",
    "LdoDesign",
    "Metrics",
    "ModeKind",
    "ModeLabel",
    "ModeMap",
    "ModePrediction",
    "NumericalError",
    "PlantMode",
    "RootLocus",
    "SimScenario",
    "SimTrace",
    "StepResponse",
    "ValidationError",
    "build_model",
    "closed_loop_poles",
    "default_design",
    "detect_mode",
    "jury_stable",
    "linear_response",
    "linear_step_response",
    "measure",
    "mode_exists",
    "mode_map",
    "overshoot_to_pm",
    "relay_fundamental",
    "root_locus",
    "simulate",
]
