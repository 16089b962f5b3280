"""Coupled dynamics of AI-driven mobility adoption and urban congestion.

The package simulates the two-variable system

    dC/dt = k2 - k1 * A * C
    dA/dt = k3 * (A_max - A) - k4 * C

with hand-rolled fixed-step RK4 and adaptive RK45 integrators (compiled
kernels when available, pure Python otherwise), equilibrium and stability
analysis, threshold-event detection, parameter sweeps and sensitivities,
least-squares calibration, and deterministic SVG reporting.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends, get_kernels
from .analysis import (
    METRICS,
    CalibrationProblem,
    CalibrationResult,
    EventHit,
    EventSpec,
    SensitivityRow,
    SweepRow,
    SweepSpec,
    calibrate,
    evaluate_metric,
    find_events,
    first_event,
    misfit,
    sensitivity,
    sweep,
)
from .errors import (
    DegenerateModelError,
    MaxStepsError,
    MobisimError,
    NumericalError,
    ParseError,
    StiffnessError,
    ValidationError,
)
from .integrate import (
    ADAPTIVE_RK45,
    FIXED_RK4,
    DenseOutput,
    Diagnostics,
    Horizon,
    IntegratorConfig,
    Trajectory,
    integrate,
    step_rk4,
)
from .model import (
    MARGINAL,
    SADDLE,
    STABLE_NODE,
    STABLE_SPIRAL,
    UNSTABLE_NODE,
    UNSTABLE_SPIRAL,
    Derivative,
    FixedPoint,
    MobilityState,
    ModelParams,
    equilibria,
    jacobian,
    rhs,
)
from .scenarios import (
    ScenarioSpec,
    all_presets,
    parse_scenario,
    preset,
    preset_names,
    run_scenario,
    scenario_from_dict,
    scenario_to_dict,
    serialize_scenario,
    with_setting,
)
from .svgplot import PALETTE, PlotSpec, Series, render_svg
from .trajio import (
    build_manifest,
    format_float,
    parse_trajectory,
    read_trajectory,
    sha256_hex,
    trajectory_to_csv,
    trajectory_to_json,
    write_manifest,
    write_trajectory,
)

__all__ = [
    "ADAPTIVE_RK45",
    "BACKEND",
    "FIXED_RK4",
    "MARGINAL",
    "METRICS",
    "PALETTE",
    "SADDLE",
    "STABLE_NODE",
    "STABLE_SPIRAL",
    "UNSTABLE_NODE",
    "UNSTABLE_SPIRAL",
    "CalibrationProblem",
    "CalibrationResult",
    "DegenerateModelError",
    "DenseOutput",
    "Derivative",
    "Diagnostics",
    "EventHit",
    "EventSpec",
    "FixedPoint",
    "Horizon",
    "IntegratorConfig",
    "MaxStepsError",
    "MobilityState",
    "MobisimError",
    "ModelParams",
    "NumericalError",
    "ParseError",
    "PlotSpec",
    "ScenarioSpec",
    "SensitivityRow",
    "Series",
    "StiffnessError",
    "SweepRow",
    "SweepSpec",
    "Trajectory",
    "ValidationError",
    "__version__",
    "all_presets",
    "available_backends",
    "calibrate",
    "equilibria",
    "evaluate_metric",
    "find_events",
    "first_event",
    "build_manifest",
    "format_float",
    "get_kernels",
    "integrate",
    "jacobian",
    "misfit",
    "parse_scenario",
    "parse_trajectory",
    "preset",
    "preset_names",
    "read_trajectory",
    "render_svg",
    "rhs",
    "run_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "sensitivity",
    "serialize_scenario",
    "sha256_hex",
    "step_rk4",
    "sweep",
    "trajectory_to_csv",
    "trajectory_to_json",
    "with_setting",
    "write_manifest",
    "write_trajectory",
]
