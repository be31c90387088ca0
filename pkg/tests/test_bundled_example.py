"""
End-to-end run on the bundled two-subsystem example (marked slow; run with
`pytest -m slow`). Needs cvxpy with an SDP-capable solver.
"""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from switched_ts_lmi.core import run
from switched_ts_lmi.modules.controller import synthesize
from switched_ts_lmi.modules.lmi import SynthesisOptions
from switched_ts_lmi.modules.model import load_system
from switched_ts_lmi.modules.verify import VerifyConfig, certify
from tests.conftest import EXAMPLE_PATH

pytestmark = pytest.mark.slow

ZETA2 = [1.7, 1.5]


@pytest.fixture(scope="module")
def controller():
    pytest.importorskip("cvxpy")
    system = load_system(EXAMPLE_PATH)
    return system, synthesize(system, SynthesisOptions(zeta2=ZETA2))


class TestBundledExample:
    def test_synthesis_is_certified(self, controller):
        _, ctrl = controller
        counts = ctrl.metadata["block_counts"]
        assert counts == {"G1": 24, "G2": 32, "G3": 16, "G4stab": 32, "G4rob": 32}
        assert ctrl.metadata["num_scalars"] == 234
        assert all(r["min_eig"] >= r["margin"] - 1e-7 for r in ctrl.metadata["residuals"].values())
        assert ctrl.zeta2() == ZETA2

    def test_closed_loop_certificate(self, controller):
        system, ctrl = controller
        report = certify(system, ctrl, VerifyConfig(runs=20))
        assert report.check("lmi_residuals").passed
        assert report.check("lyapunov_decrease").passed
        assert report.check("jump_ratio").passed
        assert report.check("settling").passed
        hinf = report.check("hinf")
        assert hinf.passed, hinf.detail
        assert len(report.hinf) == 2 and all(len(h["ratios"]) == 20 for h in report.hinf)

    def test_repro_is_deterministic(self, tmp_path):
        pytest.importorskip("cvxpy")
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert run(["repro", "--out", str(out), "--runs", "4", "--jobs", "1"]) == 0
        for name in ("controller.json", "trajectory.csv", "summary.json", "verification_report.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
        log = json.loads((outs[0] / "synthesis_log.json").read_text(encoding="utf-8"))
        assert log["n_bar"] == 1.0
        assert log["attempts"]["coherent"]["status"] == "Feasible"
