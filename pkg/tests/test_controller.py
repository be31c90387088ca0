"""
Unit tests for the non-PDC control law, controller files and synthesis.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from switched_ts_lmi.modules.controller import (
    attenuation_threshold, check_dimensions, closed_loop_gain, control_output,
    controller_from_dict, controller_to_dict, load_controller, save_controller, synthesize,
)
from switched_ts_lmi.modules.debug_logger import DebugLogger
from switched_ts_lmi.modules.errors import (
    IndefiniteMatrixError, InfeasibleError, InvalidOptionError, SystemParseError, ValidationFailedError,
)
from switched_ts_lmi.modules.lmi import SynthesisOptions, VarRef
from switched_ts_lmi.modules.model import parse_system
from tests.conftest import hand_controller, lti_document


class TestControlLaw:
    def test_static_gain_on_lti(self, lti_system):
        ctrl = hand_controller(lti_system, gain=-0.5, mixing=2.0)
        u = control_output(ctrl, 0, 0, np.array([1.0]), np.array([3.0]))
        assert u == pytest.approx([-0.75])

    def test_blending_inverts_the_blended_mixing_block(self, pair_system):
        ctrl = hand_controller(pair_system)
        ctrl.assignment[VarRef("K", (0, 0, 1))][:] = 1.0
        ctrl.mixing[(0, 0, 1)][:] = 4.0
        h = np.array([0.25, 0.75])
        u = control_output(ctrl, 0, 0, h, np.array([2.0]))
        k_h = 0.25 * -0.5 + 0.75 * 1.0
        m_h = 0.25 * 2.0 + 0.75 * 4.0
        assert u == pytest.approx([k_h / m_h * 2.0])

    def test_paper_literal_mixes_with_x9(self, lti_system):
        ctrl = hand_controller(lti_system, layout="paper-literal", gain=1.0, mixing=4.0)
        assert ctrl.mixing_family == "X9"
        assert control_output(ctrl, 0, 0, np.array([1.0]), np.array([2.0])) == pytest.approx([0.5])

    def test_indefinite_mixing_block_raises(self, lti_system):
        ctrl = hand_controller(lti_system, mixing=-1.0)
        with pytest.raises(IndefiniteMatrixError):
            control_output(ctrl, 0, 0, np.array([1.0]), np.array([1.0]))

    def test_ill_conditioned_mixing_warns(self):
        doc = lti_document()
        sub = doc["subsystems"][0]
        sub["output_dim"] = 2
        sub["modes"][0]["rules"][0]["C"] = [[1.0, 0.0], [0.0, 1.0]]
        system = parse_system(json.dumps(doc))
        ctrl = hand_controller(system)
        ctrl.mixing[(0, 0, 0)][:] = np.diag([1.0, 1e-10])
        dbg = DebugLogger(True)
        for _ in range(50):
            control_output(ctrl, 0, 0, np.array([1.0]), np.array([1.0, 0.0]), dbg)
        assert len(dbg.warnings) == 1
        assert "condition number" in dbg.warnings[0]

        quiet = DebugLogger(False)
        control_output(ctrl, 0, 0, np.array([1.0]), np.array([1.0, 0.0]), quiet)
        assert quiet.warnings == []

    def test_zero_output_gives_zero_input(self, pair_system):
        ctrl = hand_controller(pair_system)
        ctrl.mixing[(0, 0, 1)][:] = 3.0
        for h in (np.array([1.0, 0.0]), np.array([0.3, 0.7])):
            assert np.all(control_output(ctrl, 0, 0, h, np.zeros(1)) == 0.0)

    def test_output_is_linear_in_y(self):
        rng = np.random.default_rng(3)
        doc = lti_document()
        sub = doc["subsystems"][0]
        sub["output_dim"] = 2
        sub["modes"][0]["rules"][0]["C"] = [[1.0, 0.0], [0.0, 1.0]]
        ctrl = hand_controller(parse_system(json.dumps(doc)))
        ctrl.assignment[VarRef("K", (0, 0, 0))][:] = rng.standard_normal((1, 2))
        m = rng.standard_normal((2, 2))
        ctrl.mixing[(0, 0, 0)][:] = m @ m.T + np.eye(2)
        h = np.array([1.0])
        y1, y2 = rng.standard_normal(2), rng.standard_normal(2)
        a, b = 1.7, -0.4
        combined = control_output(ctrl, 0, 0, h, a * y1 + b * y2)
        separate = a * control_output(ctrl, 0, 0, h, y1) + b * control_output(ctrl, 0, 0, h, y2)
        assert combined == pytest.approx(separate, abs=1e-12)

    @pytest.mark.parametrize("c", [0.01, 2.0, 350.0])
    def test_common_scaling_of_gain_and_mixing_leaves_output_unchanged(self, pair_system, c):
        ctrl = hand_controller(pair_system)
        ctrl.assignment[VarRef("K", (0, 0, 1))][:] = 1.2
        ctrl.mixing[(0, 0, 1)][:] = 4.0
        h, y = np.array([0.4, 0.6]), np.array([-1.3])
        before = control_output(ctrl, 0, 0, h, y)
        for k in range(2):
            ctrl.assignment[VarRef("K", (0, 0, k))][:] *= c
            ctrl.mixing[(0, 0, k)][:] *= c
        assert control_output(ctrl, 0, 0, h, y) == pytest.approx(before, rel=1e-12)

    def test_closed_loop_gain(self, lti_system):
        ctrl = hand_controller(lti_system, gain=-3.0, mixing=2.0)
        assert closed_loop_gain(ctrl, 0, 0, 0) == pytest.approx(np.array([[-1.5]]))


class TestControllerFiles:
    def test_save_and_load(self, tmp_path, pair_system):
        ctrl = hand_controller(pair_system)
        path = tmp_path / "controller.json"
        save_controller(ctrl, path)
        back = load_controller(path)
        assert back.layout == ctrl.layout
        assert set(back.assignment) == set(ctrl.assignment)
        for ref, value in ctrl.assignment.items():
            assert np.array_equal(back.assignment[ref], value)
        check_dimensions(pair_system, back)

    def test_indices_are_one_based_on_disk(self, lti_system):
        data = controller_to_dict(hand_controller(lti_system))
        gains = [v for v in data["variables"] if v["family"] == "K"]
        assert gains[0]["index"] == [1, 1, 1]

    def test_rejects_foreign_document(self):
        with pytest.raises(SystemParseError):
            controller_from_dict({"layout": "coherent"})

    def test_rejects_broken_json(self, tmp_path):
        path = tmp_path / "controller.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SystemParseError):
            load_controller(path)

    def test_dimension_mismatch(self, lti_system, pair_system):
        with pytest.raises(InvalidOptionError):
            check_dimensions(pair_system, hand_controller(lti_system))


class TestSynthesize:
    def test_lti_closed_loop_is_hurwitz(self, lti_system):
        pytest.importorskip("cvxpy")
        ctrl = synthesize(lti_system, SynthesisOptions())
        rule = lti_system.subsystems[0].modes[0].rules[0]
        acl = rule.A + rule.B @ closed_loop_gain(ctrl, 0, 0, 0) @ rule.C
        assert np.max(np.linalg.eigvals(acl).real) < 0
        assert ctrl.metadata["block_counts"]["G4stab"] == 1
        assert all(r["min_eig"] >= r["margin"] - 1e-7 for r in ctrl.metadata["residuals"].values())

    def test_metadata_has_no_wall_clock(self, lti_system):
        pytest.importorskip("cvxpy")
        ctrl = synthesize(lti_system, SynthesisOptions())
        assert "elapsed" not in ctrl.metadata["solver"]
        assert "solve_time" not in ctrl.metadata["solver"]

    def test_infeasible_echoes_configuration(self):
        pytest.importorskip("cvxpy")
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["rules"][0]["A"] = [[0.5, 0.0], [0.0, -1.0]]
        system = parse_system(json.dumps(doc))
        with pytest.raises(InfeasibleError) as exc:
            synthesize(system, SynthesisOptions(eps=1e-5))
        assert exc.value.configuration["eps"] == 1e-5

    def test_invalid_system_is_refused(self):
        doc = lti_document()
        doc["subsystems"][0]["modes"][0]["membership"] = ["0.5"]
        system = parse_system(json.dumps(doc))
        with pytest.raises(ValidationFailedError):
            synthesize(system, SynthesisOptions())

    def test_attenuation_threshold_requires_interconnection(self, lti_system):
        with pytest.raises(InvalidOptionError):
            attenuation_threshold(lti_system, SynthesisOptions())

    def test_attenuation_threshold_is_feasible_at_its_answer(self, pair_system):
        pytest.importorskip("cvxpy")
        scale, zeta2 = attenuation_threshold(pair_system, SynthesisOptions(zeta2=[1.0, 1.0]), iterations=4)
        assert scale > 0
        assert zeta2 == [scale, scale]
        ctrl = synthesize(pair_system, SynthesisOptions(zeta2=zeta2))
        assert ctrl.zeta2() == zeta2
