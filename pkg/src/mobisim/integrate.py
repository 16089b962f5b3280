"""Time integration of the congestion/adoption system.

Two integrators are provided behind one configuration type:

* ``fixed-rk4`` -- classical fixed-step RK4. When an output grid point
  falls inside a step, a shortened step lands exactly on it.
* ``adaptive-rk45`` -- Dormand-Prince 5(4) embedded pair with step
  control ``h_new = h * min(5, max(0.2, 0.9 * (tol/err)^(1/5)))`` and a
  fourth-order dense output used both for grid sampling and for event
  location.

Both are deterministic: identical inputs produce bit-identical
trajectories. The hot loops live in the kernel backend selected by
:mod:`mobisim._backend`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import NumericalError, ValidationError
from .model import MobilityState, ModelParams, _require_finite

FIXED_RK4 = "fixed-rk4"
ADAPTIVE_RK45 = "adaptive-rk45"
METHODS = (FIXED_RK4, ADAPTIVE_RK45)

DEFAULT_STEP = 0.01
DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
DEFAULT_MAX_STEPS = 10_000_000
MIN_RTOL = 1e-14


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator choice plus its tuning knobs."""

    method: str = FIXED_RK4
    step: float = DEFAULT_STEP
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(
                f"method must be one of {', '.join(METHODS)}; got {self.method!r}"
            )
        for name in ("step", "rtol", "atol"):
            value = _require_finite(getattr(self, name), name)
            if value <= 0.0:
                raise ValidationError(f"{name} must be > 0, got {value!r}")
            object.__setattr__(self, name, value)
        if self.rtol < MIN_RTOL:
            raise ValidationError(f"rtol must be >= {MIN_RTOL}, got {self.rtol!r}")
        if not isinstance(self.max_steps, int) or isinstance(self.max_steps, bool):
            raise ValidationError(f"max_steps must be an integer, got {self.max_steps!r}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps!r}")


@dataclass(frozen=True)
class Horizon:
    """Output window: integrate [t0, t_end], report ``output_points`` samples."""

    t0: float = 0.0
    t_end: float = 100.0
    output_points: int = 1001

    def __post_init__(self):
        t0 = _require_finite(self.t0, "t0")
        t_end = _require_finite(self.t_end, "t_end")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "t_end", t_end)
        if not (t_end > t0):
            raise ValidationError(f"t_end must be > t0, got t0={t0!r}, t_end={t_end!r}")
        if not isinstance(self.output_points, int) or isinstance(self.output_points, bool):
            raise ValidationError(
                f"output_points must be an integer, got {self.output_points!r}"
            )
        if self.output_points < 2:
            raise ValidationError(
                f"output_points must be >= 2, got {self.output_points!r}"
            )

    def grid(self) -> np.ndarray:
        """The evenly spaced output grid; the final point is exactly t_end."""
        n = self.output_points
        times = self.t0 + np.arange(n) * ((self.t_end - self.t0) / (n - 1))
        times[n - 1] = self.t_end
        if not np.all(np.diff(times) > 0.0):
            raise ValidationError(
                "output grid is not strictly increasing; horizon span too small "
                f"for {n} points"
            )
        return times


@dataclass(frozen=True)
class Diagnostics:
    """Post-run integration facts."""

    congestion_went_negative: bool
    adoption_went_negative: bool
    steps: int
    rejected_steps: int


class DenseOutput:
    """Piecewise-polynomial continuous extension of an adaptive run.

    One quartic segment per accepted step; evaluation at a node time
    returns the accepted state exactly.
    """

    def __init__(self, node_t, node_c, node_a, cont):
        self.node_t = np.asarray(node_t)
        self.node_c = np.asarray(node_c)
        self.node_a = np.asarray(node_a)
        self.cont = np.asarray(cont)

    @property
    def t0(self) -> float:
        return float(self.node_t[0])

    @property
    def t_end(self) -> float:
        return float(self.node_t[-1])

    def evaluate(self, t: float) -> MobilityState:
        """State at any time inside the integrated span."""
        t = _require_finite(t, "t")
        if t < self.node_t[0] or t > self.node_t[-1]:
            raise ValidationError(
                f"t={t!r} outside the integrated span "
                f"[{self.t0!r}, {self.t_end!r}]"
            )
        k = int(np.searchsorted(self.node_t, t, side="right")) - 1
        if k >= len(self.cont):
            k = len(self.cont) - 1
        if t == self.node_t[k]:
            return MobilityState(float(self.node_c[k]), float(self.node_a[k]))
        if t == self.node_t[k + 1]:
            return MobilityState(float(self.node_c[k + 1]), float(self.node_a[k + 1]))
        hs = float(self.node_t[k + 1]) - float(self.node_t[k])
        th = (t - float(self.node_t[k])) / hs
        omth = 1.0 - th
        row = self.cont[k]
        c = float(row[0]) + th * (
            float(row[1]) + omth * (float(row[2]) + th * (float(row[3]) + omth * float(row[4])))
        )
        a = float(row[5]) + th * (
            float(row[6]) + omth * (float(row[7]) + th * (float(row[8]) + omth * float(row[9])))
        )
        return MobilityState(c, a)


@dataclass(eq=False)
class Trajectory:
    """Sampled solution plus provenance and diagnostics.

    ``params``/``integrator``/``diagnostics`` are ``None`` for trajectories
    read from bare sample files. ``dense`` is only set by adaptive runs and
    is never serialized.
    """

    times: np.ndarray
    congestion: np.ndarray
    adoption: np.ndarray
    scenario_name: str = ""
    params: ModelParams | None = None
    integrator: IntegratorConfig | None = None
    diagnostics: Diagnostics | None = None
    dense: DenseOutput | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.congestion = np.asarray(self.congestion, dtype=np.float64)
        self.adoption = np.asarray(self.adoption, dtype=np.float64)
        n = len(self.times)
        if n < 1:
            raise ValidationError("trajectory needs at least one sample")
        if len(self.congestion) != n or len(self.adoption) != n:
            raise ValidationError(
                "times, congestion, and adoption must have equal lengths; got "
                f"{n}, {len(self.congestion)}, {len(self.adoption)}"
            )
        if not np.all(np.isfinite(self.times)):
            raise ValidationError("times must all be finite")
        if not np.all(np.isfinite(self.congestion)) or not np.all(np.isfinite(self.adoption)):
            raise ValidationError("state samples must all be finite")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValidationError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> MobilityState:
        return MobilityState(float(self.congestion[i]), float(self.adoption[i]))

    def final_state(self) -> MobilityState:
        return self.state(len(self) - 1)


def step_rk4(state: MobilityState, t: float, h: float, params: ModelParams) -> MobilityState:
    """One classical RK4 step from ``state`` at time ``t`` with size ``h``.

    The system is autonomous; ``t`` is used only for error reporting.
    """
    t = _require_finite(t, "t")
    h = _require_finite(h, "h")
    if h <= 0.0:
        raise ValidationError(f"h must be > 0, got {h!r}")
    c, a = _backend.kernels.rk4_step(
        state.congestion,
        state.adoption,
        h,
        params.k1,
        params.k2,
        params.k3,
        params.k4,
        params.a_max,
    )
    if not (math.isfinite(c) and math.isfinite(a)):
        raise NumericalError(
            f"RK4 stage values became non-finite at t={t!r} (step {h!r})", t=t, h=h
        )
    return MobilityState(c, a)


def integrate(
    initial: MobilityState,
    params: ModelParams,
    horizon: Horizon,
    config: IntegratorConfig = IntegratorConfig(),
    scenario_name: str = "",
) -> Trajectory:
    """Integrate the system over ``horizon`` and sample the output grid.

    Fixed-step trajectories sample actual integration states (every grid
    point is landed on exactly); adaptive trajectories sample the dense
    output and carry it in ``Trajectory.dense``.
    """
    times = np.ascontiguousarray(horizon.grid())
    kern = _backend.kernels
    if config.method == FIXED_RK4:
        cs, as_, steps, cneg, aneg = kern.rk4_grid(
            initial.congestion,
            initial.adoption,
            times,
            config.step,
            params.k1,
            params.k2,
            params.k3,
            params.k4,
            params.a_max,
            config.max_steps,
        )
        diag = Diagnostics(
            congestion_went_negative=bool(cneg),
            adoption_went_negative=bool(aneg),
            steps=int(steps),
            rejected_steps=0,
        )
        dense = None
    else:
        (cs, as_, node_t, node_c, node_a, cont, nacc, nrej, cneg, aneg) = kern.dopri_grid(
            initial.congestion,
            initial.adoption,
            times,
            config.rtol,
            config.atol,
            config.max_steps,
            params.k1,
            params.k2,
            params.k3,
            params.k4,
            params.a_max,
        )
        diag = Diagnostics(
            congestion_went_negative=bool(cneg),
            adoption_went_negative=bool(aneg),
            steps=int(nacc),
            rejected_steps=int(nrej),
        )
        dense = DenseOutput(node_t, node_c, node_a, cont)
    return Trajectory(
        times=times,
        congestion=cs,
        adoption=as_,
        scenario_name=scenario_name,
        params=params,
        integrator=config,
        diagnostics=diag,
        dense=dense,
    )
