"""
switched_ts_lmi package - v1.0

Decentralized switched Takagi-Sugeno non-PDC static output-feedback synthesis:
LMI assembly, SDP solving with independent certification, hybrid closed-loop
simulation and verification.

Package Structure:
------------------
switched_ts_lmi/
├── __init__.py              - Package initialization
├── main.py                  - Entry point (delegates to core)
├── core.py                  - CLI: validate / synth / simulate / verify / repro
├── data/
│   └── paper_siv.sys        - Bundled two-subsystem example
└── modules/
    ├── constants.py         - Defaults, tolerances, exit codes, grammar regex
    ├── errors.py            - Exception hierarchy (each class carries an exit code)
    ├── debug_logger.py      - Solver/check event collector
    ├── membership.py        - Membership expression grammar and evaluation
    ├── model.py             - System file parsing, validation, blending
    ├── lmi.py               - Decision variables and the G1..G4rob LMI families
    ├── jacobi.py            - Cyclic Jacobi symmetric eigensolver
    ├── sdp.py               - Conic encoding, solver adapter, residual check
    ├── controller.py        - Synthesis, controller files, non-PDC control law
    ├── sim.py               - RK4 hybrid simulation, CSV/summary, H-infinity ratios
    └── verify.py            - Certification report
"""

__version__ = "1.0"

from .core import main, run
from .modules.controller import ControllerSet, control_output, load_controller, save_controller, synthesize
from .modules.lmi import SynthesisOptions, assemble_program, family_counts
from .modules.model import SystemSpec, load_system, parse_system, serialize_system, validate
from .modules.sdp import encode, residual_check, solve
from .modules.sim import SimConfig, hinf_metrics, lyapunov_samples, simulate
from .modules.verify import VerifyConfig, certify

__all__ = [
    'main', 'run', '__version__',
    'SystemSpec', 'load_system', 'parse_system', 'serialize_system', 'validate',
    'SynthesisOptions', 'assemble_program', 'family_counts',
    'encode', 'solve', 'residual_check',
    'ControllerSet', 'synthesize', 'control_output', 'save_controller', 'load_controller',
    'SimConfig', 'simulate', 'hinf_metrics', 'lyapunov_samples',
    'VerifyConfig', 'certify',
]
