"""Scenario presets and the JSON scenario-document format.

A scenario bundles model parameters, an initial state, an output horizon,
and an integrator configuration. Four named presets span the
high/low-adoption x strong/weak-regulation grid; JSON documents follow the
schema::

    {
      "name": "...",                      # required
      "description": "...",
      "params":     {"k1":..,"k2":..,"k3":..,"k4":..,"a_max":..},  # k1..k4 required
      "initial":    {"congestion":..,"adoption":..},
      "horizon":    {"t0":..,"t_end":..,"output_points":..},
      "integrator": {"method":..,"step":..,"rtol":..,"atol":..}
    }

Unknown keys are errors; omitted optional fields take the preset defaults
below. ``serialize_scenario(parse_scenario(x))`` normalizes any valid
document to a canonical form that then round-trips bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import ParseError, ValidationError
from .integrate import (
    ADAPTIVE_RK45,
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    DEFAULT_STEP,
    FIXED_RK4,
    Horizon,
    IntegratorConfig,
    Trajectory,
    integrate,
)
from .model import MobilityState, ModelParams

DEFAULT_A_MAX = 100.0
DEFAULT_INITIAL = MobilityState(congestion=100.0, adoption=10.0)
DEFAULT_HORIZON = Horizon(t0=0.0, t_end=100.0, output_points=1001)
DEFAULT_INTEGRATOR = IntegratorConfig(method=FIXED_RK4, step=0.01)

# name -> (description, k1, k2, k3, k4)
_PRESETS = {
    "scenario-1": ("High AI adoption with strong regulatory support", 0.05, 0.3, 0.1, 0.01),
    "scenario-2": ("High AI adoption with weak regulatory support", 0.03, 1.2, 0.08, 0.02),
    "scenario-3": ("Low AI adoption with strong regulatory support", 0.02, 0.4, 0.03, 0.02),
    "scenario-4": ("Low AI adoption with weak regulatory support", 0.01, 1.5, 0.02, 0.03),
}

# --set / sweep parameter names -> where they live in a ScenarioSpec.
PARAM_KEYS = ("k1", "k2", "k3", "k4", "a_max")
INITIAL_KEYS = {"C0": "congestion", "A0": "adoption"}
HORIZON_KEYS = ("t0", "t_end", "output_points")
SETTABLE_KEYS = PARAM_KEYS + tuple(INITIAL_KEYS) + HORIZON_KEYS


@dataclass(frozen=True)
class ScenarioSpec:
    """A fully resolved, runnable scenario."""

    name: str
    description: str
    params: ModelParams
    initial: MobilityState
    horizon: Horizon
    integrator: IntegratorConfig

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValidationError(f"name must be a non-empty string, got {self.name!r}")
        if not isinstance(self.description, str):
            raise ValidationError(f"description must be a string, got {self.description!r}")


def preset_names() -> tuple[str, ...]:
    return tuple(_PRESETS)


def preset(name: str) -> ScenarioSpec:
    """A named preset with the shared default initial state and horizon."""
    if name not in _PRESETS:
        known = ", ".join(_PRESETS)
        raise ValidationError(f"unknown preset {name!r}; choose one of: {known}")
    description, k1, k2, k3, k4 = _PRESETS[name]
    return ScenarioSpec(
        name=name,
        description=description,
        params=ModelParams(k1=k1, k2=k2, k3=k3, k4=k4, a_max=DEFAULT_A_MAX),
        initial=DEFAULT_INITIAL,
        horizon=DEFAULT_HORIZON,
        integrator=DEFAULT_INTEGRATOR,
    )


def all_presets() -> tuple[ScenarioSpec, ...]:
    return tuple(preset(name) for name in _PRESETS)


def run_scenario(spec: ScenarioSpec) -> Trajectory:
    """Integrate a scenario; the trajectory carries the scenario name."""
    return integrate(
        spec.initial, spec.params, spec.horizon, spec.integrator, scenario_name=spec.name
    )


def with_setting(spec: ScenarioSpec, key: str, value: float) -> ScenarioSpec:
    """A copy of ``spec`` with one settable field replaced.

    Keys: k1..k4, a_max (params), C0/A0 (initial state), t0/t_end/
    output_points (horizon).
    """
    if key in PARAM_KEYS:
        return replace(spec, params=replace(spec.params, **{key: value}))
    if key in INITIAL_KEYS:
        return replace(spec, initial=replace(spec.initial, **{INITIAL_KEYS[key]: value}))
    if key in HORIZON_KEYS:
        if key == "output_points":
            value = _as_int(value, "output_points")
        return replace(spec, horizon=replace(spec.horizon, **{key: value}))
    raise ValidationError(
        f"unknown setting {key!r}; choose one of: {', '.join(SETTABLE_KEYS)}"
    )


def _as_int(value, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ValidationError(f"{field} must be an integer, got {value!r}")
    return value


def _require_number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{field} must be a number, got {value!r}")
    return float(value)


def _check_keys(obj: dict, allowed: tuple[str, ...], where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ValidationError(
            f"unknown key(s) in {where}: {', '.join(unknown)}; "
            f"allowed: {', '.join(allowed)}"
        )


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    """Build a ScenarioSpec from a parsed scenario document."""
    if not isinstance(doc, dict):
        raise ValidationError(f"scenario document must be an object, got {type(doc).__name__}")
    _check_keys(
        doc, ("name", "description", "params", "initial", "horizon", "integrator"), "scenario"
    )
    if "name" not in doc:
        raise ValidationError("scenario document is missing the required key 'name'")
    name = doc["name"]
    description = doc.get("description", "")

    params_doc = doc.get("params")
    if not isinstance(params_doc, dict):
        raise ValidationError("scenario document needs a 'params' object with k1..k4")
    _check_keys(params_doc, ("k1", "k2", "k3", "k4", "a_max"), "params")
    for key in ("k1", "k2", "k3", "k4"):
        if key not in params_doc:
            raise ValidationError(f"params is missing the required key {key!r}")
    params = ModelParams(
        k1=_require_number(params_doc["k1"], "k1"),
        k2=_require_number(params_doc["k2"], "k2"),
        k3=_require_number(params_doc["k3"], "k3"),
        k4=_require_number(params_doc["k4"], "k4"),
        a_max=_require_number(params_doc.get("a_max", DEFAULT_A_MAX), "a_max"),
    )

    initial_doc = doc.get("initial", {})
    if not isinstance(initial_doc, dict):
        raise ValidationError("'initial' must be an object")
    _check_keys(initial_doc, ("congestion", "adoption"), "initial")
    initial = MobilityState(
        congestion=_require_number(
            initial_doc.get("congestion", DEFAULT_INITIAL.congestion), "congestion"
        ),
        adoption=_require_number(
            initial_doc.get("adoption", DEFAULT_INITIAL.adoption), "adoption"
        ),
    )

    horizon_doc = doc.get("horizon", {})
    if not isinstance(horizon_doc, dict):
        raise ValidationError("'horizon' must be an object")
    _check_keys(horizon_doc, ("t0", "t_end", "output_points"), "horizon")
    horizon = Horizon(
        t0=_require_number(horizon_doc.get("t0", DEFAULT_HORIZON.t0), "t0"),
        t_end=_require_number(horizon_doc.get("t_end", DEFAULT_HORIZON.t_end), "t_end"),
        output_points=_as_int(
            horizon_doc.get("output_points", DEFAULT_HORIZON.output_points), "output_points"
        ),
    )

    integ_doc = doc.get("integrator", {})
    if not isinstance(integ_doc, dict):
        raise ValidationError("'integrator' must be an object")
    _check_keys(integ_doc, ("method", "step", "rtol", "atol"), "integrator")
    method = integ_doc.get("method", DEFAULT_INTEGRATOR.method)
    integrator = IntegratorConfig(
        method=method,
        step=_require_number(integ_doc.get("step", DEFAULT_STEP), "step"),
        rtol=_require_number(integ_doc.get("rtol", DEFAULT_RTOL), "rtol"),
        atol=_require_number(integ_doc.get("atol", DEFAULT_ATOL), "atol"),
    )

    return ScenarioSpec(
        name=name,
        description=description,
        params=params,
        initial=initial,
        horizon=horizon,
        integrator=integrator,
    )


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid scenario JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
        ) from None
    return scenario_from_dict(doc)


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    """The canonical (fully expanded) document for a scenario."""
    return {
        "name": spec.name,
        "description": spec.description,
        "params": {
            "k1": spec.params.k1,
            "k2": spec.params.k2,
            "k3": spec.params.k3,
            "k4": spec.params.k4,
            "a_max": spec.params.a_max,
        },
        "initial": {
            "congestion": spec.initial.congestion,
            "adoption": spec.initial.adoption,
        },
        "horizon": {
            "t0": spec.horizon.t0,
            "t_end": spec.horizon.t_end,
            "output_points": spec.horizon.output_points,
        },
        "integrator": {
            "method": spec.integrator.method,
            "step": spec.integrator.step,
            "rtol": spec.integrator.rtol,
            "atol": spec.integrator.atol,
        },
    }


def serialize_scenario(spec: ScenarioSpec) -> str:
    """Canonical JSON for a scenario (two-space indent, trailing newline)."""
    return json.dumps(scenario_to_dict(spec), indent=2, allow_nan=False) + "\n"
