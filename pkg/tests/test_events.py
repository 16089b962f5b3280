"""Event detection: oracle agreement, tie handling, refinement paths."""

import numpy as np
import pytest

from mobisim import (
    ADAPTIVE_RK45,
    EventSpec,
    IntegratorConfig,
    Trajectory,
    ValidationError,
    find_events,
    first_event,
    integrate,
    preset,
    run_scenario,
)
from mobisim._backend import kernels

PRESET_NAMES = ("scenario-1", "scenario-2", "scenario-3", "scenario-4")
TIME_TOL = 1e-6


def oracle(params, var_index, level, t_end=100.0, c0=100.0, a0=10.0):
    return kernels.scan_crossings(
        c0, a0, 0.0, t_end, 1e-5,
        params.k1, params.k2, params.k3, params.k4, params.a_max,
        var_index, level,
    )


class TestEventSpec:
    def test_rejects_unknown_variable(self):
        with pytest.raises(ValidationError, match="variable"):
            EventSpec(variable="speed", level=1.0)

    def test_rejects_bad_direction(self):
        with pytest.raises(ValidationError, match="direction"):
            EventSpec(variable="adoption", level=1.0, direction="up")

    def test_rejects_nonfinite_level(self):
        with pytest.raises(ValidationError, match="level"):
            EventSpec(variable="adoption", level=float("nan"))

    def test_event_argument_type_checked(self):
        traj = run_scenario(preset("scenario-1"))
        with pytest.raises(ValidationError, match="EventSpec"):
            find_events(traj, ("adoption", 60.0))


class TestAgainstOracle:
    def test_fixed_step_refinement_matches_scan(self):
        for name in PRESET_NAMES:
            spec = preset(name)
            traj = run_scenario(spec)
            for var_index, variable, level in (
                (1, "adoption", 0.6 * spec.params.a_max),
                (0, "congestion", 50.0),
            ):
                hits = find_events(traj, EventSpec(variable=variable, level=level))
                ref_t, ref_d = oracle(spec.params, var_index, level)
                assert len(hits) == len(ref_t), (name, variable)
                for hit, t_ref, d_ref in zip(hits, ref_t, ref_d):
                    assert abs(hit.time - t_ref) <= TIME_TOL
                    assert (hit.direction == "rising") == (d_ref > 0)

    def test_adaptive_dense_refinement_matches_scan(self):
        for name in ("scenario-1", "scenario-2"):
            spec = preset(name)
            traj = integrate(
                spec.initial, spec.params, spec.horizon,
                IntegratorConfig(method=ADAPTIVE_RK45, rtol=1e-10, atol=1e-12),
            )
            level = 0.6 * spec.params.a_max
            hits = find_events(traj, EventSpec(variable="adoption", level=level))
            ref_t, _ = oracle(spec.params, 1, level)
            assert len(hits) == len(ref_t)
            for hit, t_ref in zip(hits, ref_t):
                assert abs(hit.time - t_ref) <= TIME_TOL

    def test_hit_state_sits_on_the_level(self):
        spec = preset("scenario-1")
        traj = run_scenario(spec)
        hits = find_events(traj, EventSpec(variable="adoption", level=60.0))
        assert len(hits) == 1
        assert abs(hits[0].state.adoption - 60.0) <= 1e-9 * 60.0

    def test_scenario_four_dips_through_level_twice(self):
        # Adoption initially falls (strong congestion drag), then recovers:
        # one falling and one rising crossing of a level below the start.
        spec = preset("scenario-4")
        traj = run_scenario(spec)
        hits = find_events(traj, EventSpec(variable="adoption", level=8.0))
        assert [h.direction for h in hits] == ["falling", "rising"]
        ref_t, ref_d = oracle(spec.params, 1, 8.0)
        assert list(ref_d) == [-1, 1]
        for hit, t_ref in zip(hits, ref_t):
            assert abs(hit.time - t_ref) <= TIME_TOL

    def test_direction_filter(self):
        spec = preset("scenario-4")
        traj = run_scenario(spec)
        falling = find_events(traj, EventSpec(variable="adoption", level=8.0, direction="falling"))
        rising = find_events(traj, EventSpec(variable="adoption", level=8.0, direction="rising"))
        assert len(falling) == 1 and falling[0].direction == "falling"
        assert len(rising) == 1 and rising[0].direction == "rising"
        assert falling[0].time < rising[0].time

    def test_first_event(self):
        spec = preset("scenario-4")
        traj = run_scenario(spec)
        hit = first_event(traj, EventSpec(variable="adoption", level=8.0))
        assert hit is not None and hit.direction == "falling"
        assert first_event(traj, EventSpec(variable="adoption", level=-5.0)) is None


def bare(times, congestion, adoption=None):
    n = len(times)
    if adoption is None:
        adoption = [1.0] * n
    return Trajectory(times=times, congestion=congestion, adoption=adoption)


class TestTieHandling:
    LEVEL = 10.0

    def test_exact_sample_crossing_counts_once(self):
        traj = bare([0.0, 1.0, 2.0], [15.0, 10.0, 5.0])
        hits = find_events(traj, EventSpec(variable="congestion", level=self.LEVEL))
        assert len(hits) == 1
        assert hits[0].time == 1.0
        assert hits[0].direction == "falling"
        assert hits[0].state.congestion == 10.0

    def test_flat_run_counts_at_first_zero_sample(self):
        traj = bare([0.0, 1.0, 2.0, 3.0, 4.0], [15.0, 10.0, 10.0, 10.0, 5.0])
        hits = find_events(traj, EventSpec(variable="congestion", level=self.LEVEL))
        assert [(h.time, h.direction) for h in hits] == [(1.0, "falling")]

    def test_tangential_touch_is_not_a_crossing(self):
        traj = bare([0.0, 1.0, 2.0], [15.0, 10.0, 15.0])
        assert find_events(traj, EventSpec(variable="congestion", level=self.LEVEL)) == []
        traj = bare([0.0, 1.0, 2.0, 3.0], [15.0, 10.0, 10.0, 15.0])
        assert find_events(traj, EventSpec(variable="congestion", level=self.LEVEL)) == []

    def test_leading_run_takes_direction_from_following_sign(self):
        traj = bare([0.0, 1.0, 2.0], [10.0, 10.0, 15.0])
        hits = find_events(traj, EventSpec(variable="congestion", level=self.LEVEL))
        assert [(h.time, h.direction) for h in hits] == [(0.0, "rising")]

    def test_trailing_run_takes_direction_from_preceding_sign(self):
        traj = bare([0.0, 1.0, 2.0], [5.0, 10.0, 10.0])
        hits = find_events(traj, EventSpec(variable="congestion", level=self.LEVEL))
        assert [(h.time, h.direction) for h in hits] == [(1.0, "rising")]

    def test_everywhere_on_level_is_no_crossing(self):
        traj = bare([0.0, 1.0, 2.0], [10.0, 10.0, 10.0])
        assert find_events(traj, EventSpec(variable="congestion", level=self.LEVEL)) == []

    def test_oracle_agrees_on_tie_semantics(self):
        # The brute-force scan applies the same rules; landing a sample
        # exactly on the level mid-run must count once, at that sample.
        times, directions = kernels.scan_crossings(
            20.0, 10.0, 0.0, 1.0, 0.25, 0.0, 1.0, 0.0, 0.0, 100.0, 0, 20.125
        )
        # dC/dt = 1 with C0=20: C(t) = 20 + t crosses 20.125 once, rising.
        assert len(times) == 1
        assert directions[0] == 1
        assert abs(times[0] - 0.125) <= 1e-12


class TestBareTrajectoryFallback:
    def test_linear_interpolation_between_samples(self):
        traj = bare([0.0, 1.0], [5.0, 15.0])
        hits = find_events(traj, EventSpec(variable="congestion", level=10.0))
        assert len(hits) == 1
        assert hits[0].time == pytest.approx(0.5, abs=1e-12)
        assert hits[0].direction == "rising"

    def test_adoption_variable(self):
        traj = Trajectory(
            times=[0.0, 1.0, 2.0],
            congestion=[1.0, 1.0, 1.0],
            adoption=[0.0, 4.0, 16.0],
        )
        hits = find_events(traj, EventSpec(variable="adoption", level=2.0))
        assert len(hits) == 1
        assert hits[0].time == pytest.approx(0.5, abs=1e-12)
