"""Trajectory analysis: threshold events, sweeps, sensitivities, calibration.

Event detection scans the sampled trajectory for level crossings and then
refines each crossing time by bisection — against the continuous extension
for adaptive runs, or against a re-integration of the bracketing interval
at one hundredth of the step for fixed-step runs — until the time is known
to within ``1e-9`` of the horizon span and the variable is within
``1e-9 * max(1, |level|)`` of the level. Calibration minimizes a sum of
squared residuals with a Nelder-Mead simplex over log-parameters.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .errors import MaxStepsError, NumericalError, ValidationError
from .integrate import FIXED_RK4, Trajectory
from .model import MobilityState, ModelParams, _require_finite
from .scenarios import SETTABLE_KEYS, ScenarioSpec, run_scenario, with_setting

EVENT_VARIABLES = ("congestion", "adoption")
RISING = "rising"
FALLING = "falling"
EVENT_DIRECTIONS = (RISING, FALLING, "any")

EVENT_TIME_RTOL = 1e-9
EVENT_VALUE_RTOL = 1e-9
_REFINE_SUBDIVISION = 100.0
_BISECT_CAP = 200

METRICS = (
    "final_congestion",
    "final_adoption",
    "peak_congestion",
    "peak_adoption",
    "min_congestion",
    "min_adoption",
)

DEFAULT_REL_STEP = 1e-4
DEFAULT_FIT_PARAMS = ("k1", "k2", "k3", "k4")
_FITTABLE = ("k1", "k2", "k3", "k4", "a_max")

NM_REFLECT = 1.0
NM_EXPAND = 2.0
NM_CONTRACT = 0.5
NM_SHRINK = 0.5
NM_INITIAL_LOG_STEP = 0.05
NM_X_TOL = 1e-10
NM_F_TOL = 1e-14
NM_MAX_ITER = 10_000


@dataclass(frozen=True)
class EventSpec:
    """A level crossing to watch for in one state variable."""

    variable: str
    level: float
    direction: str = "any"

    def __post_init__(self):
        if self.variable not in EVENT_VARIABLES:
            raise ValidationError(
                f"variable must be one of {', '.join(EVENT_VARIABLES)}; got {self.variable!r}"
            )
        object.__setattr__(self, "level", _require_finite(self.level, "level"))
        if self.direction not in EVENT_DIRECTIONS:
            raise ValidationError(
                f"direction must be one of {', '.join(EVENT_DIRECTIONS)}; "
                f"got {self.direction!r}"
            )


@dataclass(frozen=True)
class EventHit:
    """One detected crossing: when, the full state there, and which way."""

    time: float
    state: MobilityState
    direction: str


def _sample_evaluator(traj: Trajectory):
    """Best available continuous evaluator ``t -> MobilityState``.

    Adaptive runs evaluate their dense output; fixed-step runs re-integrate
    from the nearest earlier sample at ``step / 100``; bare trajectories
    (no provenance) fall back to linear interpolation between samples.
    """
    if traj.dense is not None:
        return traj.dense.evaluate
    if (
        traj.params is not None
        and traj.integrator is not None
        and traj.integrator.method == FIXED_RK4
    ):
        p = traj.params
        times = traj.times
        h_fine = traj.integrator.step / _REFINE_SUBDIVISION

        def evaluate(t: float) -> MobilityState:
            i = int(np.searchsorted(times, t, side="right")) - 1
            if i < 0:
                i = 0
            if i >= len(times) - 1:
                i = len(times) - 2
            t_left = float(times[i])
            if t == t_left:
                return traj.state(i)
            c, a, _, _, _ = _backend.kernels.rk4_span(
                float(traj.congestion[i]),
                float(traj.adoption[i]),
                t_left,
                t - t_left,
                h_fine,
                p.k1,
                p.k2,
                p.k3,
                p.k4,
                p.a_max,
            )
            return MobilityState(c, a)

        return evaluate

    times = traj.times

    def interpolate(t: float) -> MobilityState:
        i = int(np.searchsorted(times, t, side="right")) - 1
        if i < 0:
            i = 0
        if i >= len(times) - 1:
            i = len(times) - 2
        t0 = float(times[i])
        t1 = float(times[i + 1])
        w = (t - t0) / (t1 - t0)
        c = float(traj.congestion[i]) + w * (
            float(traj.congestion[i + 1]) - float(traj.congestion[i])
        )
        a = float(traj.adoption[i]) + w * (float(traj.adoption[i + 1]) - float(traj.adoption[i]))
        return MobilityState(c, a)

    return interpolate


def _bisect_crossing(evaluate, value_of, level, ta, tb, left_positive, ttol, vtol):
    """Shrink ``[ta, tb]`` around the crossing; returns ``(time, state)``.

    Stops once the bracket is within ``ttol`` and the evaluated variable is
    within ``vtol`` of the level (or the bracket reaches float resolution).
    """
    a = ta
    b = tb
    tm = 0.5 * (a + b)
    state = evaluate(tm)
    for _ in range(_BISECT_CAP):
        gm = value_of(state) - level
        if gm == 0.0:
            return tm, state
        if (b - a) <= ttol and abs(gm) <= vtol:
            return tm, state
        if (gm > 0.0) == left_positive:
            a = tm
        else:
            b = tm
        nxt = 0.5 * (a + b)
        if nxt <= a or nxt >= b:
            return tm, state
        tm = nxt
        state = evaluate(tm)
    return tm, state


def find_events(traj: Trajectory, event: EventSpec) -> list[EventHit]:
    """All crossings of ``event.level`` in time order.

    A sample landing exactly on the level counts once, at that sample, with
    the direction implied by the surrounding signs; tangential touches are
    not crossings. Crossings between samples are refined by bisection.
    """
    if not isinstance(event, EventSpec):
        raise ValidationError(f"event must be an EventSpec, got {type(event).__name__}")
    if len(traj) < 2:
        return []
    values = traj.congestion if event.variable == "congestion" else traj.adoption
    value_of = (
        (lambda s: s.congestion) if event.variable == "congestion" else (lambda s: s.adoption)
    )
    times = traj.times
    level = event.level
    span = float(times[-1]) - float(times[0])
    ttol = EVENT_TIME_RTOL * span
    vtol = EVENT_VALUE_RTOL * (abs(level) if abs(level) > 1.0 else 1.0)
    evaluate = _sample_evaluator(traj)

    hits: list[EventHit] = []
    g_prev = float(values[0]) - level
    has_zero = g_prev == 0.0
    zero_i = 0
    sign_before = 0
    for i in range(1, len(traj)):
        g = float(values[i]) - level
        if g == 0.0:
            if not has_zero:
                has_zero = True
                zero_i = i
                sign_before = 1 if g_prev > 0.0 else -1
        else:
            s = 1 if g > 0.0 else -1
            if has_zero:
                if sign_before != s:
                    hits.append(
                        EventHit(
                            time=float(times[zero_i]),
                            state=traj.state(zero_i),
                            direction=RISING if s > 0 else FALLING,
                        )
                    )
                has_zero = False
            elif g_prev != 0.0 and (g_prev < 0.0) != (g < 0.0):
                t_hit, state = _bisect_crossing(
                    evaluate,
                    value_of,
                    level,
                    float(times[i - 1]),
                    float(times[i]),
                    g_prev > 0.0,
                    ttol,
                    vtol,
                )
                hits.append(
                    EventHit(time=t_hit, state=state, direction=RISING if s > 0 else FALLING)
                )
        g_prev = g
    if has_zero and sign_before != 0:
        hits.append(
            EventHit(
                time=float(times[zero_i]),
                state=traj.state(zero_i),
                direction=RISING if sign_before < 0 else FALLING,
            )
        )
    if event.direction == "any":
        return hits
    return [h for h in hits if h.direction == event.direction]


def first_event(traj: Trajectory, event: EventSpec) -> EventHit | None:
    """The earliest matching crossing, or ``None``."""
    hits = find_events(traj, event)
    return hits[0] if hits else None


def evaluate_metric(traj: Trajectory, metric: str) -> float:
    """A scalar summary of a trajectory (final/peak/min of either variable)."""
    if metric == "final_congestion":
        return float(traj.congestion[-1])
    if metric == "final_adoption":
        return float(traj.adoption[-1])
    if metric == "peak_congestion":
        return float(np.max(traj.congestion))
    if metric == "peak_adoption":
        return float(np.max(traj.adoption))
    if metric == "min_congestion":
        return float(np.min(traj.congestion))
    if metric == "min_adoption":
        return float(np.min(traj.adoption))
    raise ValidationError(f"unknown metric {metric!r}; choose one of: {', '.join(METRICS)}")


@dataclass(frozen=True)
class SweepSpec:
    """One scenario setting varied over a list of values."""

    scenario: ScenarioSpec
    key: str
    values: tuple

    def __post_init__(self):
        if self.key not in SETTABLE_KEYS:
            raise ValidationError(
                f"unknown sweep key {self.key!r}; choose one of: {', '.join(SETTABLE_KEYS)}"
            )
        values = tuple(self.values)
        if not values:
            raise ValidationError("sweep needs at least one value")
        values = tuple(_require_finite(v, f"values[{i}]") for i, v in enumerate(values))
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SweepRow:
    """Metrics for one swept value, in the order they were requested."""

    value: float
    metrics: dict


def sweep(spec: SweepSpec, metrics=("final_congestion", "final_adoption"), workers=None):
    """Run the scenario once per value; rows come back in input order.

    ``workers > 1`` runs the integrations on a thread pool; results are
    identical to the serial path.
    """
    metrics = tuple(metrics)
    if not metrics:
        raise ValidationError("sweep needs at least one metric")
    for name in metrics:
        if name not in METRICS:
            raise ValidationError(f"unknown metric {name!r}; choose one of: {', '.join(METRICS)}")
    if workers is not None:
        if isinstance(workers, bool) or not isinstance(workers, int):
            raise ValidationError(f"workers must be an integer >= 1, got {workers!r}")
        if workers < 1:
            raise ValidationError(f"workers must be an integer >= 1, got {workers!r}")

    def run_one(value: float) -> SweepRow:
        traj = run_scenario(with_setting(spec.scenario, spec.key, value))
        return SweepRow(
            value=float(value), metrics={name: evaluate_metric(traj, name) for name in metrics}
        )

    if workers is None or workers == 1 or len(spec.values) == 1:
        return [run_one(v) for v in spec.values]
    with ThreadPoolExecutor(max_workers=min(workers, len(spec.values))) as pool:
        return list(pool.map(run_one, spec.values))


@dataclass(frozen=True)
class SensitivityRow:
    """Derivative of a metric with respect to one model parameter.

    ``elasticity`` is ``d(metric)/d(param) * param / metric``, or ``None``
    when the base metric or base value is zero.
    """

    param: str
    base_value: float
    step: float
    derivative: float
    elasticity: float | None


def sensitivity(
    scenario: ScenarioSpec,
    metric: str = "final_congestion",
    params: tuple = DEFAULT_FIT_PARAMS,
    rel_step: float = DEFAULT_REL_STEP,
) -> list[SensitivityRow]:
    """Central finite differences of ``metric`` in each model parameter.

    The step is ``rel_step * max(|value|, 1e-6)``; when the downward
    perturbation would leave the parameter domain (rates must stay
    non-negative) a forward difference is used instead.
    """
    rel_step = _require_finite(rel_step, "rel_step")
    if rel_step <= 0.0:
        raise ValidationError(f"rel_step must be > 0, got {rel_step!r}")
    params = tuple(params)
    if not params:
        raise ValidationError("sensitivity needs at least one parameter")
    for name in params:
        if name not in _FITTABLE:
            raise ValidationError(
                f"unknown parameter {name!r}; choose one of: {', '.join(_FITTABLE)}"
            )
    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}; choose one of: {', '.join(METRICS)}")

    base_metric = evaluate_metric(run_scenario(scenario), metric)
    rows = []
    for name in params:
        base = getattr(scenario.params, name)
        step = rel_step * (abs(base) if abs(base) > 1e-6 else 1e-6)
        up = evaluate_metric(run_scenario(with_setting(scenario, name, base + step)), metric)
        if base - step >= 0.0:
            down = evaluate_metric(run_scenario(with_setting(scenario, name, base - step)), metric)
            derivative = (up - down) / (2.0 * step)
        else:
            derivative = (up - base_metric) / step
        elasticity = None
        if base_metric != 0.0 and base != 0.0:
            elasticity = derivative * base / base_metric
        rows.append(
            SensitivityRow(
                param=name,
                base_value=float(base),
                step=float(step),
                derivative=float(derivative),
                elasticity=elasticity,
            )
        )
    return rows


@dataclass(frozen=True)
class CalibrationProblem:
    """Observed series plus everything needed to simulate candidates.

    ``initial`` is the state at ``times[0]``; the misfit is the sum of
    squared residuals in both variables at every observed time. Candidate
    runs use fixed-step RK4 at ``step``.
    """

    times: np.ndarray
    congestion: np.ndarray
    adoption: np.ndarray
    initial: MobilityState
    guess: ModelParams
    fit: tuple = DEFAULT_FIT_PARAMS
    step: float = 0.01
    max_steps: int = 10_000_000

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        congestion = np.asarray(self.congestion, dtype=np.float64)
        adoption = np.asarray(self.adoption, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "congestion", congestion)
        object.__setattr__(self, "adoption", adoption)
        n = len(times)
        if n < 2:
            raise ValidationError("calibration needs at least two observed times")
        if len(congestion) != n or len(adoption) != n:
            raise ValidationError(
                "times, congestion, and adoption must have equal lengths; got "
                f"{n}, {len(congestion)}, {len(adoption)}"
            )
        if not (
            np.all(np.isfinite(times))
            and np.all(np.isfinite(congestion))
            and np.all(np.isfinite(adoption))
        ):
            raise ValidationError("observations must all be finite")
        if not np.all(np.diff(times) > 0.0):
            raise ValidationError("observed times must be strictly increasing")
        fit = tuple(self.fit)
        if not fit:
            raise ValidationError("fit must name at least one parameter")
        if len(set(fit)) != len(fit):
            raise ValidationError(f"fit lists a parameter twice: {fit!r}")
        for name in fit:
            if name not in _FITTABLE:
                raise ValidationError(
                    f"cannot fit {name!r}; choose from: {', '.join(_FITTABLE)}"
                )
            if getattr(self.guess, name) <= 0.0:
                raise ValidationError(
                    f"guess.{name} must be > 0 to calibrate in log space, "
                    f"got {getattr(self.guess, name)!r}"
                )
        object.__setattr__(self, "fit", fit)
        step = _require_finite(self.step, "step")
        if step <= 0.0:
            raise ValidationError(f"step must be > 0, got {step!r}")
        object.__setattr__(self, "step", step)
        if isinstance(self.max_steps, bool) or not isinstance(self.max_steps, int):
            raise ValidationError(f"max_steps must be an integer >= 1, got {self.max_steps!r}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be an integer >= 1, got {self.max_steps!r}")


@dataclass(frozen=True)
class CalibrationResult:
    """Fitted parameters and how the search ended."""

    params: ModelParams
    objective: float
    iterations: int
    evaluations: int
    converged: bool


def misfit(problem: CalibrationProblem, params: ModelParams) -> float:
    """Sum of squared residuals of a candidate against the observations.

    Runs that blow up or exceed the step budget score ``inf`` so the
    search simply moves away from them.
    """
    kern = _backend.kernels
    c = problem.initial.congestion
    a = problem.initial.adoption
    total = (c - float(problem.congestion[0])) ** 2 + (a - float(problem.adoption[0])) ** 2
    budget = problem.max_steps
    try:
        for i in range(1, len(problem.times)):
            t_left = float(problem.times[i - 1])
            span = float(problem.times[i]) - t_left
            c, a, used, _, _ = kern.rk4_span(
                c,
                a,
                t_left,
                span,
                problem.step,
                params.k1,
                params.k2,
                params.k3,
                params.k4,
                params.a_max,
                budget,
            )
            budget -= int(used)
            total += (c - float(problem.congestion[i])) ** 2
            total += (a - float(problem.adoption[i])) ** 2
    except (NumericalError, MaxStepsError):
        return math.inf
    if not math.isfinite(total):
        return math.inf
    return total


def _params_from_log(problem: CalibrationProblem, x) -> ModelParams | None:
    updates = {}
    for name, xi in zip(problem.fit, x):
        try:
            value = math.exp(xi)
        except OverflowError:
            return None
        if not math.isfinite(value) or value <= 0.0:
            return None
        updates[name] = value
    try:
        return replace(problem.guess, **updates)
    except ValidationError:
        return None


def calibrate(
    problem: CalibrationProblem, max_iterations: int = NM_MAX_ITER
) -> CalibrationResult:
    """Fit the named parameters with a Nelder-Mead simplex in log space.

    Coefficients: reflect 1.0, expand 2.0, contract 0.5, shrink 0.5. The
    search stops when the simplex collapses below ``1e-10`` in every
    log-coordinate, or the value spread falls below
    ``1e-14 * (1 + |best|)``, or after ``max_iterations`` iterations
    (10000 by default).
    """
    if isinstance(max_iterations, bool) or not isinstance(max_iterations, int):
        raise ValidationError(
            f"max_iterations must be an integer >= 1, got {max_iterations!r}"
        )
    if max_iterations < 1:
        raise ValidationError(
            f"max_iterations must be an integer >= 1, got {max_iterations!r}"
        )
    n = len(problem.fit)
    evaluations = 0

    def objective(x) -> float:
        nonlocal evaluations
        evaluations += 1
        params = _params_from_log(problem, x)
        if params is None:
            return math.inf
        return misfit(problem, params)

    x0 = [math.log(getattr(problem.guess, name)) for name in problem.fit]
    simplex = [list(x0)]
    for i in range(n):
        vertex = list(x0)
        vertex[i] += NM_INITIAL_LOG_STEP
        simplex.append(vertex)
    fvals = [objective(x) for x in simplex]
    if not any(math.isfinite(f) for f in fvals):
        raise ValidationError(
            "calibration cannot start: the initial guess and all of its "
            "perturbations fail to integrate"
        )

    iterations = 0
    converged = False
    while iterations < max_iterations:
        order = sorted(range(n + 1), key=lambda i: fvals[i])
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        best = simplex[0]
        f_best = fvals[0]
        f_worst = fvals[n]

        diameter = 0.0
        for vertex in simplex[1:]:
            for j in range(n):
                d = abs(vertex[j] - best[j])
                if d > diameter:
                    diameter = d
        spread = f_worst - f_best
        if diameter < NM_X_TOL or (
            math.isfinite(spread) and spread < NM_F_TOL * (1.0 + abs(f_best))
        ):
            converged = True
            break

        iterations += 1
        centroid = [sum(vertex[j] for vertex in simplex[:n]) / n for j in range(n)]
        worst = simplex[n]
        reflected = [centroid[j] + NM_REFLECT * (centroid[j] - worst[j]) for j in range(n)]
        f_reflected = objective(reflected)
        if f_reflected < f_best:
            expanded = [centroid[j] + NM_EXPAND * (reflected[j] - centroid[j]) for j in range(n)]
            f_expanded = objective(expanded)
            if f_expanded < f_reflected:
                simplex[n] = expanded
                fvals[n] = f_expanded
            else:
                simplex[n] = reflected
                fvals[n] = f_reflected
            continue
        if f_reflected < fvals[n - 1]:
            simplex[n] = reflected
            fvals[n] = f_reflected
            continue
        if f_reflected < f_worst:
            contracted = [
                centroid[j] + NM_CONTRACT * (reflected[j] - centroid[j]) for j in range(n)
            ]
            f_contracted = objective(contracted)
            if f_contracted <= f_reflected:
                simplex[n] = contracted
                fvals[n] = f_contracted
                continue
        else:
            contracted = [
                centroid[j] + NM_CONTRACT * (worst[j] - centroid[j]) for j in range(n)
            ]
            f_contracted = objective(contracted)
            if f_contracted < f_worst:
                simplex[n] = contracted
                fvals[n] = f_contracted
                continue
        for i in range(1, n + 1):
            simplex[i] = [
                best[j] + NM_SHRINK * (simplex[i][j] - best[j]) for j in range(n)
            ]
            fvals[i] = objective(simplex[i])

    order = sorted(range(n + 1), key=lambda i: fvals[i])
    best = simplex[order[0]]
    f_best = fvals[order[0]]
    params = _params_from_log(problem, best)
    if params is None:
        raise NumericalError("calibration ended on an unrepresentable parameter vector")
    return CalibrationResult(
        params=params,
        objective=f_best,
        iterations=iterations,
        evaluations=evaluations,
        converged=converged,
    )
