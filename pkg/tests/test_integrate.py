"""Integrators: configs, grids, trajectories, dense output, failure modes."""

import math

import numpy as np
import pytest

from mobisim import (
    ADAPTIVE_RK45,
    FIXED_RK4,
    Horizon,
    IntegratorConfig,
    MaxStepsError,
    MobilityState,
    ModelParams,
    NumericalError,
    StiffnessError,
    Trajectory,
    ValidationError,
    integrate,
    preset,
    step_rk4,
)
from tests.conftest import TIGHT, stable_draw

SEED = 20240812
PRESET_NAMES = ("scenario-1", "scenario-2", "scenario-3", "scenario-4")


class TestIntegratorConfig:
    def test_defaults(self):
        c = IntegratorConfig()
        assert c.method == FIXED_RK4
        assert c.step == 0.01
        assert c.rtol == 1e-8
        assert c.atol == 1e-10
        assert c.max_steps == 10_000_000

    def test_rejects_unknown_method(self):
        with pytest.raises(ValidationError, match="method"):
            IntegratorConfig(method="euler")

    def test_rejects_bad_step(self):
        for step in (0.0, -1.0, math.nan, math.inf):
            with pytest.raises(ValidationError, match="step"):
                IntegratorConfig(step=step)

    def test_rejects_bad_tolerances(self):
        with pytest.raises(ValidationError, match="rtol"):
            IntegratorConfig(rtol=0.0)
        with pytest.raises(ValidationError, match="rtol"):
            IntegratorConfig(rtol=1e-15)
        with pytest.raises(ValidationError, match="atol"):
            IntegratorConfig(atol=-1e-10)

    def test_rejects_bad_max_steps(self):
        with pytest.raises(ValidationError, match="max_steps"):
            IntegratorConfig(max_steps=0)
        with pytest.raises(ValidationError, match="max_steps"):
            IntegratorConfig(max_steps=True)
        with pytest.raises(ValidationError, match="max_steps"):
            IntegratorConfig(max_steps=1.5)


class TestHorizon:
    def test_grid_hits_both_endpoints_exactly(self):
        hz = Horizon(0.0, 100.0, 1001)
        grid = hz.grid()
        assert grid[0] == 0.0 and grid[-1] == 100.0
        assert len(grid) == 1001
        assert np.all(np.diff(grid) > 0.0)

    def test_grid_is_uniform(self):
        grid = Horizon(2.0, 7.0, 11).grid()
        assert np.allclose(np.diff(grid), 0.5, rtol=0.0, atol=1e-15)

    def test_rejects_bad_spans(self):
        with pytest.raises(ValidationError):
            Horizon(1.0, 1.0, 11)
        with pytest.raises(ValidationError):
            Horizon(5.0, 1.0, 11)

    def test_rejects_bad_point_counts(self):
        with pytest.raises(ValidationError, match="output_points"):
            Horizon(0.0, 1.0, 1)
        with pytest.raises(ValidationError, match="output_points"):
            Horizon(0.0, 1.0, 2.5)


class TestStepRK4:
    def test_single_step_matches_series_expansion(self):
        p = ModelParams(k1=0.05, k2=0.3, k3=0.1, k4=0.01, a_max=100.0)
        s = MobilityState(100.0, 10.0)
        h = 1e-3
        out = step_rk4(s, 0.0, h, p)
        # RK4 local error is O(h^5); compare with a tight adaptive run.
        tight = integrate(s, p, Horizon(0.0, h, 2), TIGHT)
        assert out.congestion == pytest.approx(tight.congestion[-1], abs=1e-13)
        assert out.adoption == pytest.approx(tight.adoption[-1], abs=1e-13)

    def test_rejects_nonpositive_step(self):
        p = preset("scenario-1").params
        with pytest.raises(ValidationError, match="h"):
            step_rk4(MobilityState(1.0, 1.0), 0.0, 0.0, p)

    def test_reports_nonfinite_blowup(self):
        p = ModelParams(k1=5.0, k2=0.0, k3=0.0, k4=0.0, a_max=100.0)
        state = MobilityState(1e160, 1e160)
        with pytest.raises(NumericalError):
            step_rk4(state, 0.0, 1e3, p)


class TestTrajectory:
    def test_validates_lengths_and_order(self):
        with pytest.raises(ValidationError, match="lengths"):
            Trajectory(times=[0.0, 1.0], congestion=[1.0], adoption=[1.0, 2.0])
        with pytest.raises(ValidationError, match="increasing"):
            Trajectory(times=[0.0, 0.0], congestion=[1.0, 1.0], adoption=[1.0, 1.0])
        with pytest.raises(ValidationError, match="finite"):
            Trajectory(times=[0.0, 1.0], congestion=[1.0, math.nan], adoption=[1.0, 1.0])

    def test_state_accessors(self):
        tr = Trajectory(times=[0.0, 1.0], congestion=[3.0, 4.0], adoption=[5.0, 6.0])
        assert len(tr) == 2
        assert tr.state(0) == MobilityState(3.0, 5.0)
        assert tr.final_state() == MobilityState(4.0, 6.0)


class TestFixedStep:
    def test_samples_lie_on_horizon_grid(self):
        spec = preset("scenario-1")
        tr = integrate(spec.initial, spec.params, spec.horizon, spec.integrator)
        assert np.array_equal(tr.times, spec.horizon.grid())
        assert tr.scenario_name == ""
        assert tr.params == spec.params
        assert tr.integrator == spec.integrator
        assert tr.diagnostics.rejected_steps == 0
        assert tr.diagnostics.steps == 10_000  # 1000 intervals x 10 substeps
        assert tr.dense is None

    def test_step_count_includes_shortened_substeps(self):
        spec = preset("scenario-1")
        hz = Horizon(0.0, 1.0, 4)  # interval 1/3, step 0.1 -> 4 substeps each
        tr = integrate(spec.initial, spec.params, hz, IntegratorConfig(step=0.1))
        assert tr.diagnostics.steps == 12

    def test_matches_manual_stepping(self):
        p = preset("scenario-2").params
        state = MobilityState(100.0, 10.0)
        for _ in range(10):
            state = step_rk4(state, 0.0, 0.01, p)
        tr = integrate(
            MobilityState(100.0, 10.0), p, Horizon(0.0, 0.1, 2), IntegratorConfig(step=0.01)
        )
        # 0.1 is not an exact binary multiple of 0.01, so the final shortened
        # substep differs from the tenth full step by rounding only.
        assert tr.congestion[-1] == pytest.approx(state.congestion, rel=1e-12)
        assert tr.adoption[-1] == pytest.approx(state.adoption, rel=1e-12)

    def test_negative_adoption_sets_diagnostic_flag(self):
        p = ModelParams(k1=0.01, k2=1.5, k3=0.02, k4=0.3, a_max=100.0)
        tr = integrate(
            MobilityState(100.0, 10.0), p, Horizon(0.0, 3.0, 31), IntegratorConfig(step=0.01)
        )
        assert tr.diagnostics.adoption_went_negative
        assert not tr.diagnostics.congestion_went_negative

    def test_tiny_budget_raises_max_steps(self):
        spec = preset("scenario-1")
        with pytest.raises(MaxStepsError):
            integrate(
                spec.initial,
                spec.params,
                spec.horizon,
                IntegratorConfig(step=0.001, max_steps=10),
            )


class TestAdaptive:
    def test_carries_dense_output_and_diagnostics(self):
        spec = preset("scenario-2")
        tr = integrate(spec.initial, spec.params, spec.horizon, IntegratorConfig(method=ADAPTIVE_RK45))
        assert tr.dense is not None
        assert tr.diagnostics.steps > 0
        assert tr.diagnostics.rejected_steps >= 0
        assert tr.dense.t0 == 0.0 and tr.dense.t_end == 100.0

    def test_grid_endpoints_match_integration_nodes(self):
        spec = preset("scenario-3")
        tr = integrate(spec.initial, spec.params, spec.horizon, IntegratorConfig(method=ADAPTIVE_RK45))
        assert tr.times[0] == 0.0 and tr.times[-1] == 100.0
        assert tr.congestion[0] == 100.0 and tr.adoption[0] == 10.0
        assert tr.congestion[-1] == tr.dense.node_c[-1]
        assert tr.adoption[-1] == tr.dense.node_a[-1]

    def test_dense_reproduces_nodes_exactly(self):
        spec = preset("scenario-2")
        tr = integrate(spec.initial, spec.params, spec.horizon, IntegratorConfig(method=ADAPTIVE_RK45))
        d = tr.dense
        for k in range(len(d.node_t)):
            st = d.evaluate(float(d.node_t[k]))
            assert st.congestion == d.node_c[k]
            assert st.adoption == d.node_a[k]

    def test_dense_tracks_tight_reference_between_nodes(self, reference_run):
        spec = preset("scenario-2")
        tr = integrate(spec.initial, spec.params, spec.horizon, IntegratorConfig(method=ADAPTIVE_RK45))
        ref = reference_run("scenario-2")
        for i in (57, 313, 789):
            t = float(ref.times[i])
            st = tr.dense.evaluate(t)
            assert st.congestion == pytest.approx(float(ref.congestion[i]), rel=1e-6, abs=1e-9)
            assert st.adoption == pytest.approx(float(ref.adoption[i]), rel=1e-6, abs=1e-9)

    def test_dense_rejects_out_of_span(self):
        spec = preset("scenario-1")
        tr = integrate(spec.initial, spec.params, spec.horizon, IntegratorConfig(method=ADAPTIVE_RK45))
        with pytest.raises(ValidationError, match="span"):
            tr.dense.evaluate(-0.5)
        with pytest.raises(ValidationError, match="span"):
            tr.dense.evaluate(100.5)

    def test_tighter_tolerance_takes_more_steps(self):
        spec = preset("scenario-4")
        loose = integrate(
            spec.initial, spec.params, spec.horizon,
            IntegratorConfig(method=ADAPTIVE_RK45, rtol=1e-5, atol=1e-8),
        )
        tight = integrate(
            spec.initial, spec.params, spec.horizon,
            IntegratorConfig(method=ADAPTIVE_RK45, rtol=1e-11, atol=1e-13),
        )
        assert tight.diagnostics.steps > loose.diagnostics.steps

    def test_blowup_raises_stiffness_error(self):
        p = ModelParams(k1=0.05, k2=1.0, k3=0.01, k4=0.5, a_max=100.0)
        with pytest.raises(StiffnessError):
            integrate(
                MobilityState(200.0, 1.0),
                p,
                Horizon(0.0, 100.0, 11),
                IntegratorConfig(method=ADAPTIVE_RK45),
            )

    def test_tiny_budget_raises_max_steps(self):
        spec = preset("scenario-1")
        with pytest.raises(MaxStepsError):
            integrate(
                spec.initial,
                spec.params,
                spec.horizon,
                IntegratorConfig(method=ADAPTIVE_RK45, max_steps=3),
            )


class TestAccuracy:
    def test_rk4_is_fourth_order(self):
        # Halving the step cuts the endpoint error by about 2^4.
        for name in PRESET_NAMES:
            spec = preset(name)
            hz = Horizon(0.0, 1.0, 2)
            ref = integrate(spec.initial, spec.params, hz, TIGHT)
            errs = []
            for h in (0.1, 0.05):
                tr = integrate(spec.initial, spec.params, hz, IntegratorConfig(step=h))
                errs.append(
                    max(
                        abs(tr.congestion[-1] - ref.congestion[-1]),
                        abs(tr.adoption[-1] - ref.adoption[-1]),
                    )
                )
            assert 12.0 <= errs[0] / errs[1] <= 20.0

    def test_fixed_and_adaptive_agree_at_final_time(self):
        for name in PRESET_NAMES:
            spec = preset(name)
            fixed = integrate(
                spec.initial, spec.params, spec.horizon, IntegratorConfig(step=0.001)
            )
            adaptive = integrate(
                spec.initial, spec.params, spec.horizon, IntegratorConfig(method=ADAPTIVE_RK45)
            )
            assert fixed.congestion[-1] == pytest.approx(adaptive.congestion[-1], rel=1e-6)
            assert fixed.adoption[-1] == pytest.approx(adaptive.adoption[-1], rel=1e-6)

    def test_random_systems_fixed_vs_adaptive(self):
        rng = np.random.default_rng(SEED)
        hz = Horizon(0.0, 20.0, 21)
        for _ in range(25):
            params, c0, a0 = stable_draw(rng)
            s = MobilityState(c0, a0)
            fixed = integrate(s, params, hz, IntegratorConfig(step=0.002))
            adaptive = integrate(
                s, params, hz, IntegratorConfig(method=ADAPTIVE_RK45, rtol=1e-10, atol=1e-12)
            )
            assert np.allclose(fixed.congestion, adaptive.congestion, rtol=1e-7, atol=1e-9)
            assert np.allclose(fixed.adoption, adaptive.adoption, rtol=1e-7, atol=1e-9)
