"""Scenario presets, the settable-key surface, and JSON (de)serialization."""

import json

import pytest

from mobisim import (
    ADAPTIVE_RK45,
    ParseError,
    ValidationError,
    all_presets,
    parse_scenario,
    preset,
    preset_names,
    run_scenario,
    scenario_to_dict,
    serialize_scenario,
    with_setting,
)
from mobisim.scenarios import SETTABLE_KEYS

EXPECTED_RATES = {
    "scenario-1": (0.05, 0.3, 0.1, 0.01),
    "scenario-2": (0.03, 1.2, 0.08, 0.02),
    "scenario-3": (0.02, 0.4, 0.03, 0.02),
    "scenario-4": (0.01, 1.5, 0.02, 0.03),
}


class TestPresets:
    def test_names_in_order(self):
        assert preset_names() == tuple(EXPECTED_RATES)

    @pytest.mark.parametrize("name", sorted(EXPECTED_RATES))
    def test_rates(self, name):
        spec = preset(name)
        k1, k2, k3, k4 = EXPECTED_RATES[name]
        assert (spec.params.k1, spec.params.k2, spec.params.k3, spec.params.k4) == (
            k1,
            k2,
            k3,
            k4,
        )

    def test_shared_defaults(self):
        for spec in all_presets():
            assert spec.params.a_max == 100.0
            assert spec.initial.congestion == 100.0
            assert spec.initial.adoption == 10.0
            assert spec.horizon.t0 == 0.0
            assert spec.horizon.t_end == 100.0
            assert spec.horizon.output_points == 1001
            assert spec.integrator.method == "fixed-rk4"
            assert spec.integrator.step == 0.01
            assert spec.description

    def test_descriptions_distinguish_adoption_and_regulation(self):
        descriptions = [preset(name).description for name in preset_names()]
        assert len(set(descriptions)) == 4
        assert sum("High AI adoption" in d for d in descriptions) == 2
        assert sum("strong regulatory support" in d for d in descriptions) == 2

    def test_unknown_preset(self):
        with pytest.raises(ValidationError, match="scenario-1"):
            preset("scenario-9")

    def test_run_scenario_tags_trajectory(self):
        traj = run_scenario(preset("scenario-1"))
        assert traj.scenario_name == "scenario-1"
        assert traj.params == preset("scenario-1").params
        assert len(traj.times) == 1001


class TestWithSetting:
    def test_each_key_lands_in_the_right_slot(self):
        spec = preset("scenario-1")
        assert with_setting(spec, "k2", 0.7).params.k2 == 0.7
        assert with_setting(spec, "a_max", 80.0).params.a_max == 80.0
        assert with_setting(spec, "C0", 55.0).initial.congestion == 55.0
        assert with_setting(spec, "A0", 2.0).initial.adoption == 2.0
        assert with_setting(spec, "t_end", 10.0).horizon.t_end == 10.0
        assert with_setting(spec, "t0", -5.0).horizon.t0 == -5.0

    def test_output_points_coerces_integral_floats(self):
        spec = with_setting(preset("scenario-1"), "output_points", 11.0)
        assert spec.horizon.output_points == 11
        assert isinstance(spec.horizon.output_points, int)
        with pytest.raises(ValidationError, match="integer"):
            with_setting(preset("scenario-1"), "output_points", 11.5)

    def test_original_is_untouched(self):
        spec = preset("scenario-1")
        with_setting(spec, "k1", 0.9)
        assert spec.params.k1 == 0.05

    def test_unknown_key_lists_choices(self):
        with pytest.raises(ValidationError) as err:
            with_setting(preset("scenario-1"), "k9", 1.0)
        for key in SETTABLE_KEYS:
            assert key in str(err.value)

    def test_invalid_value_still_validated(self):
        with pytest.raises(ValidationError, match="k1"):
            with_setting(preset("scenario-1"), "k1", -1.0)


class TestSerialization:
    def test_round_trip_every_preset(self):
        for spec in all_presets():
            again = parse_scenario(serialize_scenario(spec))
            assert again == spec

    def test_round_trip_is_textually_stable(self):
        text = serialize_scenario(preset("scenario-3"))
        assert serialize_scenario(parse_scenario(text)) == text
        assert text.endswith("\n")

    def test_document_shape(self):
        doc = scenario_to_dict(preset("scenario-2"))
        assert set(doc) == {"name", "description", "params", "initial", "horizon", "integrator"}
        assert doc["params"] == {"k1": 0.03, "k2": 1.2, "k3": 0.08, "k4": 0.02, "a_max": 100.0}
        assert doc["initial"] == {"congestion": 100.0, "adoption": 10.0}
        assert doc["horizon"] == {"t0": 0.0, "t_end": 100.0, "output_points": 1001}
        assert doc["integrator"]["method"] == "fixed-rk4"

    def test_minimal_document_fills_defaults(self):
        text = json.dumps(
            {"name": "mine", "params": {"k1": 0.1, "k2": 0.2, "k3": 0.3, "k4": 0.4}}
        )
        spec = parse_scenario(text)
        assert spec.name == "mine"
        assert spec.description == ""
        assert spec.params.a_max == 100.0
        assert spec.initial.congestion == 100.0
        assert spec.horizon.output_points == 1001
        assert spec.integrator.method == "fixed-rk4"

    def test_partial_sections_keep_other_defaults(self):
        text = json.dumps(
            {
                "name": "mine",
                "params": {"k1": 0.1, "k2": 0.2, "k3": 0.3, "k4": 0.4},
                "horizon": {"t_end": 20.0},
                "integrator": {"method": ADAPTIVE_RK45, "rtol": 1e-10},
            }
        )
        spec = parse_scenario(text)
        assert spec.horizon.t0 == 0.0
        assert spec.horizon.t_end == 20.0
        assert spec.integrator.method == ADAPTIVE_RK45
        assert spec.integrator.rtol == 1e-10
        assert spec.integrator.atol == 1e-10

    def test_unknown_top_level_key_lists_allowed(self):
        text = json.dumps(
            {"name": "x", "params": {"k1": 1, "k2": 1, "k3": 1, "k4": 1}, "notes": "hi"}
        )
        with pytest.raises(ValidationError) as err:
            parse_scenario(text)
        message = str(err.value)
        assert "notes" in message
        assert "allowed" in message
        assert "integrator" in message

    def test_unknown_nested_key(self):
        text = json.dumps({"name": "x", "params": {"k1": 1, "k2": 1, "k3": 1, "k4": 1, "k5": 1}})
        with pytest.raises(ValidationError, match="k5"):
            parse_scenario(text)

    def test_missing_required_rate(self):
        text = json.dumps({"name": "x", "params": {"k1": 1, "k2": 1, "k3": 1}})
        with pytest.raises(ValidationError, match="k4"):
            parse_scenario(text)

    def test_missing_params_section(self):
        with pytest.raises(ValidationError, match="params"):
            parse_scenario(json.dumps({"name": "x"}))

    def test_missing_name(self):
        with pytest.raises(ValidationError, match="name"):
            parse_scenario(json.dumps({"params": {"k1": 1, "k2": 1, "k3": 1, "k4": 1}}))

    def test_non_numeric_value(self):
        text = json.dumps({"name": "x", "params": {"k1": "fast", "k2": 1, "k3": 1, "k4": 1}})
        with pytest.raises(ValidationError, match="k1"):
            parse_scenario(text)

    def test_malformed_json_reports_position(self):
        with pytest.raises(ParseError) as err:
            parse_scenario('{"name": "x",\n  "params": }')
        assert err.value.line == 2
        assert err.value.column == 13

    def test_non_object_document(self):
        with pytest.raises(ValidationError, match="object"):
            parse_scenario("[1, 2, 3]")

    def test_model_validation_applies_to_parsed_values(self):
        text = json.dumps({"name": "x", "params": {"k1": -1, "k2": 1, "k3": 1, "k4": 1}})
        with pytest.raises(ValidationError, match="k1"):
            parse_scenario(text)
