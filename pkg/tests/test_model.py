"""
Unit tests for system-file parsing, serialisation, validation and
membership evaluation.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from switched_ts_lmi.modules.errors import (
    DimensionMismatchError, InvalidMembershipError, MembershipGrammarError, SystemParseError,
    UnknownFieldError,
)
from switched_ts_lmi.modules.model import (
    HysteresisFrontiers, TimeSchedule, blend, load_system, membership_eval, parse_system,
    serialize_system, validate,
)
from tests.conftest import lti_document, pair_document


class TestParse:
    def test_bundled_example_dimensions(self, example_system):
        s1, s2 = example_system.subsystems
        assert (s1.state_dim, s1.output_dim, s1.input_dim, s1.disturbance_dim) == (2, 2, 2, 2)
        assert (s2.state_dim, s2.output_dim, s2.input_dim, s2.disturbance_dim) == (3, 3, 3, 3)
        assert [m.rule_count for m in s1.modes] == [2, 2]
        assert example_system.n_bar == 1.0

    def test_bundled_example_coupling_shapes(self, example_system):
        s1, s2 = example_system.subsystems
        rule1 = s1.modes[0].rules[0]
        rule2 = s2.modes[1].rules[1]
        assert rule1.F[1].shape == (2, 3) and rule1.Bw_peer[1].shape == (2, 3)
        assert rule2.F[0].shape == (3, 2) and rule2.Bw_peer[0].shape == (3, 2)

    def test_bundled_example_frontiers(self, example_system):
        sw = example_system.subsystems[0].switching
        assert isinstance(sw, HysteresisFrontiers)
        # H = 0.9 x1 + x2 at x(0) = (2, 2)
        assert sw.value(0, [2.0, 2.0]) == pytest.approx(3.8)

    def test_matrices_are_read_only(self, lti_system):
        with pytest.raises(ValueError):
            lti_system.subsystems[0].modes[0].rules[0].A[0, 0] = 5.0

    def test_scalar_lambda_broadcasts(self, pair_system):
        assert pair_system.subsystems[0].modes[0].lambda_bounds.tolist() == [-2.0, -2.0]

    def test_malformed_json_reports_position(self):
        with pytest.raises(SystemParseError) as exc:
            parse_system('{"system": {"name": "x"},\n "subsystems": [}')
        assert exc.value.line == 2

    def test_unknown_field(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["rules"][0]["D"] = [[0.0]]
        with pytest.raises(UnknownFieldError):
            parse_system(json.dumps(doc))

    def test_bad_coupling_key(self):
        doc = pair_document()
        rule = doc["subsystems"][0]["modes"][0]["rules"][0]
        rule["coupling"]["peer"] = rule["coupling"].pop("2")
        with pytest.raises(UnknownFieldError):
            parse_system(json.dumps(doc))

    def test_self_coupling_rejected(self):
        doc = pair_document()
        rule = doc["subsystems"][0]["modes"][0]["rules"][0]
        rule["coupling"]["1"] = rule["coupling"].pop("2")
        with pytest.raises(SystemParseError):
            parse_system(json.dumps(doc))

    def test_ragged_matrix(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["rules"][0]["A"] = [[-1.0, 1.0], [0.0]]
        with pytest.raises(SystemParseError):
            parse_system(json.dumps(doc))

    def test_membership_grammar_error_surfaces(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["membership"] = ["exp(x[1])"]
        with pytest.raises(MembershipGrammarError):
            parse_system(json.dumps(doc))

    def test_strict_dimension_check(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["rules"][0]["B"] = [[0.0, 1.0], [1.0, 0.0]]
        with pytest.raises(DimensionMismatchError):
            parse_system(json.dumps(doc))
        system = parse_system(json.dumps(doc), strict=False)
        report = validate(system)
        assert not report.ok
        assert report.violations[0].code == "dimension"
        assert "rule[1].B" in report.violations[0].where

    def test_load_from_path(self, example_path):
        assert load_system(example_path).n == 2


class TestSerialize:
    def test_reparse_is_identical(self, example_system):
        text = serialize_system(example_system)
        again = parse_system(text)
        assert serialize_system(again) == text
        r0 = example_system.subsystems[1].modes[1].rules[0]
        r1 = again.subsystems[1].modes[1].rules[0]
        assert np.array_equal(r0.F[0], r1.F[0])

    def test_schedule_survives(self, pair_system):
        again = parse_system(serialize_system(pair_system))
        sw = again.subsystems[0].switching
        assert isinstance(sw, TimeSchedule)
        assert sw.entries == [(0.0, 0), (0.5, 1)]


class TestValidate:
    def test_bundled_example_is_valid(self, example_system):
        report = validate(example_system)
        assert report.ok, [str(v) for v in report.violations]
        assert report.warnings == []

    def test_positive_lambda_is_a_warning(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["lambda"] = 0.5
        report = validate(parse_system(json.dumps(doc)))
        assert report.ok
        assert report.warnings[0].code == "lambda_positive"

    def test_convex_sum_violation(self):
        doc = pair_document()
        doc["subsystems"][1]["modes"][0]["membership"] = ["sin(x[1])^2", "0.5"]
        report = validate(parse_system(json.dumps(doc)))
        assert [v.code for v in report.violations] == ["convex_sum"]
        assert report.violations[0].where == "subsystem[2].mode[1].membership"

    def test_range_violation(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["membership"] = ["x[1]"]
        codes = {v.code for v in validate(parse_system(json.dumps(doc))).violations}
        assert "membership_range" in codes

    def test_membership_state_index_out_of_range(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["membership"] = ["sin(x[3])^2 + cos(x[3])^2"]
        report = validate(parse_system(json.dumps(doc)))
        assert [v.code for v in report.violations] == ["membership"]

    def test_one_minus_cycle(self):
        doc = pair_document()
        doc["subsystems"][0]["modes"][1]["membership"] = ["one_minus(2)", "one_minus(1)"]
        codes = [v.code for v in validate(parse_system(json.dumps(doc))).violations]
        assert "membership" in codes

    def test_schedule_must_increase(self):
        doc = pair_document()
        doc["subsystems"][0]["switching"]["schedule"] = [[0.0, 1], [0.0, 2]]
        codes = [v.code for v in validate(parse_system(json.dumps(doc))).violations]
        assert codes == ["switching"]

    def test_frontier_count(self, example_path):
        doc = json.loads(example_path.read_text(encoding="utf-8"))
        doc["subsystems"][0]["switching"]["frontiers"].pop()
        codes = [v.code for v in validate(parse_system(json.dumps(doc))).violations]
        assert codes == ["switching"]

    def test_report_dict(self, example_system):
        assert validate(example_system).to_dict() == {"ok": True, "violations": [], "warnings": []}


class TestMembershipEval:
    def test_convex_weights(self, example_system):
        h = membership_eval(example_system.subsystems[0], 0, [0.4, -1.0])
        assert h.sum() == pytest.approx(1.0)
        assert h[0] == pytest.approx(np.sin(0.4) ** 2)

    def test_wrong_state_length(self, example_system):
        with pytest.raises(InvalidMembershipError):
            membership_eval(example_system.subsystems[0], 0, [0.0, 0.0, 0.0])

    def test_out_of_range_value(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["membership"] = ["x[1]"]
        system = parse_system(json.dumps(doc))
        with pytest.raises(InvalidMembershipError):
            membership_eval(system.subsystems[0], 0, [2.0, 0.0])

    def test_tiny_excursion_is_clipped(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["membership"] = ["1 + x[1]"]
        system = parse_system(json.dumps(doc))
        h = membership_eval(system.subsystems[0], 0, [1e-10, 0.0])
        assert h.tolist() == [1.0]

    def test_blend(self):
        mats = [np.eye(2), 3 * np.eye(2)]
        assert np.allclose(blend(np.array([0.5, 0.5]), mats), 2 * np.eye(2))
