"""Shared fixtures: cached tight-tolerance reference runs for the presets."""

import numpy as np
import pytest

from mobisim import (
    ADAPTIVE_RK45,
    Horizon,
    IntegratorConfig,
    ModelParams,
    integrate,
    preset,
    preset_names,
)

TIGHT = IntegratorConfig(method=ADAPTIVE_RK45, rtol=1e-12, atol=1e-14)


@pytest.fixture(scope="session")
def reference_run():
    """Factory: preset name -> cached adaptive run at rtol=1e-12/atol=1e-14."""
    cache = {}

    def run(name: str):
        if name not in cache:
            spec = preset(name)
            cache[name] = integrate(spec.initial, spec.params, spec.horizon, TIGHT)
        return cache[name]

    return run


@pytest.fixture(scope="session")
def all_preset_names():
    return preset_names()


def stable_draw(rng: np.random.Generator):
    """Random parameters and initial state inside the well-behaved basin."""
    params = ModelParams(
        k1=rng.uniform(0.01, 0.06),
        k2=rng.uniform(0.1, 1.5),
        k3=rng.uniform(0.02, 0.12),
        k4=rng.uniform(0.005, 0.025),
        a_max=rng.uniform(60.0, 140.0),
    )
    c0 = rng.uniform(20.0, 150.0)
    a0 = rng.uniform(5.0, 50.0)
    return params, c0, a0


@pytest.fixture()
def short_horizon():
    return Horizon(t0=0.0, t_end=10.0, output_points=101)
