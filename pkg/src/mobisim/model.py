"""Core congestion/adoption dynamics.

The model couples an urban congestion index C with an AI-mobility adoption
index A:

    dC/dt = k2 - k1*A*C
    dA/dt = k3*(a_max - A) - k4*C

Adoption relieves congestion through the bilinear k1 term, a constant
inflow k2 sustains congestion, adoption saturates toward the ceiling
``a_max``, and congestion drags adoption down through k4. This module
holds the value types, the right-hand side, the analytic Jacobian, and
closed-form fixed-point analysis. Time stepping lives in
:mod:`mobisim.integrate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, ValidationError

# Fixed-point classifications.
STABLE_NODE = "stable-node"
STABLE_SPIRAL = "stable-spiral"
SADDLE = "saddle"
UNSTABLE_NODE = "unstable-node"
UNSTABLE_SPIRAL = "unstable-spiral"
MARGINAL = "marginal"

# |Re(lambda)| below this (relative to |lambda| + 1) is numerically zero.
_MARGINAL_REL = 1e-9


def _require_finite(value: float, field: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{field} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"{field} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class MobilityState:
    """Instantaneous system state: congestion index and adoption index."""

    congestion: float
    adoption: float

    def __post_init__(self):
        object.__setattr__(self, "congestion", _require_finite(self.congestion, "congestion"))
        object.__setattr__(self, "adoption", _require_finite(self.adoption, "adoption"))


@dataclass(frozen=True)
class ModelParams:
    """Model coefficients. All rates are non-negative; a_max is positive."""

    k1: float
    k2: float
    k3: float
    k4: float
    a_max: float = 100.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4"):
            value = _require_finite(getattr(self, name), name)
            if value < 0.0:
                raise ValidationError(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)
        a_max = _require_finite(self.a_max, "a_max")
        if a_max <= 0.0:
            raise ValidationError(f"a_max must be > 0, got {a_max!r}")
        object.__setattr__(self, "a_max", a_max)


@dataclass(frozen=True)
class Derivative:
    """Time derivative of a :class:`MobilityState`."""

    d_congestion: float
    d_adoption: float

    def __post_init__(self):
        object.__setattr__(
            self, "d_congestion", _require_finite(self.d_congestion, "d_congestion")
        )
        object.__setattr__(self, "d_adoption", _require_finite(self.d_adoption, "d_adoption"))


@dataclass(frozen=True)
class FixedPoint:
    """An equilibrium, its linearization, and the residual of the RHS there."""

    state: MobilityState
    classification: str
    eigenvalues: tuple[complex, complex]
    residual: float


def rhs(state: MobilityState, params: ModelParams) -> Derivative:
    """Evaluate the right-hand side of the coupled system.

    The system is autonomous: time never appears explicitly.
    """
    c = state.congestion
    a = state.adoption
    dc = params.k2 - params.k1 * a * c
    da = params.k3 * (params.a_max - a) - params.k4 * c
    return Derivative(dc, da)


def jacobian(state: MobilityState, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of the RHS at ``state``: rows are (dC', dA')."""
    return np.array(
        [
            [-params.k1 * state.adoption, -params.k1 * state.congestion],
            [-params.k4, -params.k3],
        ]
    )


def _classify(eigenvalues: tuple[complex, complex]) -> str:
    if any(abs(lam.real) < _MARGINAL_REL * (abs(lam) + 1.0) for lam in eigenvalues):
        return MARGINAL
    re1, re2 = eigenvalues[0].real, eigenvalues[1].real
    complex_pair = eigenvalues[0].imag != 0.0 or eigenvalues[1].imag != 0.0
    if re1 < 0.0 and re2 < 0.0:
        return STABLE_SPIRAL if complex_pair else STABLE_NODE
    if re1 > 0.0 and re2 > 0.0:
        return UNSTABLE_SPIRAL if complex_pair else UNSTABLE_NODE
    # Opposite real signs; a complex-conjugate pair shares its real part,
    # so only real eigenvalues reach here.
    return SADDLE


def _fixed_point(c: float, a: float, params: ModelParams) -> FixedPoint:
    state = MobilityState(c, a)
    eig = np.linalg.eigvals(jacobian(state, params))
    eigenvalues = tuple(sorted((complex(v) for v in eig), key=lambda z: (z.real, z.imag)))
    d = rhs(state, params)
    residual = max(abs(d.d_congestion), abs(d.d_adoption))
    return FixedPoint(state, _classify(eigenvalues), eigenvalues, residual)


def equilibria(params: ModelParams) -> list[FixedPoint]:
    """All real fixed points of the system, sorted by congestion.

    Setting dC/dt = 0 gives C = k2/(k1*A); substituting into dA/dt = 0
    yields the quadratic  k1*k3*A^2 - k1*k3*a_max*A + k2*k4 = 0, whose
    A-roots therefore sum to a_max and multiply to k2*k4/(k1*k3). The low
    root is recovered from the product (Vieta) to avoid cancellation.
    k2 = 0 bypasses the substitution: C = 0 is then an equilibrium branch
    of its own and A = 0 pairs with C = k3*a_max/k4 when k4 > 0.
    """
    if params.k1 == 0.0 or params.k3 == 0.0:
        raise DegenerateModelError(
            "equilibrium analysis requires k1 > 0 and k3 > 0; "
            f"got k1={params.k1!r}, k3={params.k3!r}"
        )
    points: list[tuple[float, float]] = []
    if params.k2 == 0.0:
        points.append((0.0, params.a_max))
        if params.k4 > 0.0:
            points.append((params.k3 * params.a_max / params.k4, 0.0))
    else:
        product = (params.k2 * params.k4) / (params.k1 * params.k3)
        disc = params.a_max * params.a_max - 4.0 * product
        if disc < 0.0:
            return []
        if disc == 0.0:
            roots = [0.5 * params.a_max]
        else:
            a_hi = 0.5 * (params.a_max + math.sqrt(disc))
            a_lo = product / a_hi
            roots = [a_hi, a_lo]
        for root in roots:
            if root == 0.0:
                # Only when k4 = 0; dA/dt = k3*a_max != 0 there, not a fixed point.
                continue
            points.append((params.k2 / (params.k1 * root), root))
    fixed = [_fixed_point(c, a, params) for c, a in points]
    fixed.sort(key=lambda fp: fp.state.congestion)
    return fixed
