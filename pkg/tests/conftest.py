"""
Shared fixtures: small hand-built systems plus the bundled two-subsystem example.
"""

import copy
import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from switched_ts_lmi.modules.controller import ControllerSet
from switched_ts_lmi.modules.lmi import SynthesisOptions, build_catalogue, zero_assignment
from switched_ts_lmi.modules.model import parse_system

EXAMPLE_PATH = Path(__file__).parent.parent / "switched_ts_lmi" / "data" / "paper_siv.sys"

LTI_DOCUMENT = {
    "system": {"name": "lti"},
    "subsystems": [{
        "name": "P",
        "state_dim": 2, "output_dim": 1, "input_dim": 1, "disturbance_dim": 1,
        "initial_state": [1.0, -1.0],
        "switching": {"kind": "schedule", "schedule": [[0.0, 1]]},
        "modes": [{
            "membership": ["1"],
            "lambda": 0.0,
            "rules": [{
                "A": [[-1.0, 1.0], [0.0, -2.0]],
                "B": [[0.0], [1.0]],
                "Bw": [[0.0], [0.1]],
                "C": [[1.0, 0.0]],
            }],
        }],
    }],
}


def _pair_subsystem(name, peer, a, initial):
    rule = lambda shift: {
        "A": [[-1.0 - shift, a], [0.0, -2.0]],
        "B": [[0.0], [1.0]],
        "Bw": [[0.0], [0.1]],
        "C": [[1.0, 0.0]],
        "coupling": {str(peer): {"F": [[0.01, 0.0], [0.0, 0.01]], "Bw": [[0.0], [0.01]]}},
    }
    return {
        "name": name,
        "state_dim": 2, "output_dim": 1, "input_dim": 1, "disturbance_dim": 1,
        "initial_state": initial,
        "switching": {"kind": "schedule", "schedule": [[0.0, 1], [0.5, 2]]},
        "modes": [
            {"membership": ["sin(x[1])^2", "one_minus(1)"], "lambda": -2.0, "rules": [rule(0.0), rule(0.5)]},
            {"membership": ["cos(x[2])^2", "one_minus(1)"], "lambda": -2.0, "rules": [rule(0.2), rule(0.1)]},
        ],
    }


PAIR_DOCUMENT = {
    "system": {"name": "pair"},
    "subsystems": [
        _pair_subsystem("S1", 2, 0.5, [1.0, 0.5]),
        _pair_subsystem("S2", 1, 0.3, [-0.5, 1.0]),
    ],
}


def lti_document():
    return copy.deepcopy(LTI_DOCUMENT)


def pair_document():
    return copy.deepcopy(PAIR_DOCUMENT)


@pytest.fixture
def lti_system():
    return parse_system(json.dumps(LTI_DOCUMENT))


@pytest.fixture
def pair_system():
    return parse_system(json.dumps(PAIR_DOCUMENT))


@pytest.fixture
def example_path():
    return EXAMPLE_PATH


@pytest.fixture
def example_system():
    return parse_system(EXAMPLE_PATH.read_text(encoding="utf-8"))


def hand_controller(system, layout="coherent", gain=-0.5, mixing=2.0):
    """Controller with X = I, K = gain and M = mixing * I at every vertex."""
    a = zero_assignment(build_catalogue(system))
    for ref in list(a):
        if ref.family in ("X1", "X5", "X9"):
            a[ref] = np.eye(a[ref].shape[0])
        if ref.family == ("X5" if layout == "coherent" else "X9"):
            a[ref] = mixing * np.eye(a[ref].shape[0])
        if ref.family == "K":
            a[ref] = np.full(a[ref].shape, gain)
    return ControllerSet(layout=layout, assignment=a, options=SynthesisOptions(layout=layout))
