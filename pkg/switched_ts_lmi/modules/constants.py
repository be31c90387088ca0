"""
Defaults, tolerances, exit codes, file names and membership-grammar patterns.
"""

import re

# ---------- Paths

DEFAULT_OUT_DIR = "artifacts"
BUNDLED_EXAMPLE = "paper_siv.sys"
CONTROLLER_FILE = "controller.json"
SYNTH_LOG_FILE = "synthesis_log.json"
TRAJECTORY_CSV = "trajectory.csv"
SUMMARY_JSON = "summary.json"
REPORT_JSON = "verification_report.json"
RUN_CONFIG_FILE = "run_config.json"

# ---------- Exit codes (stable, documented in README)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4
EXIT_DIVERGENCE = 5

# ---------- LMI assembly / solver tolerances

DEFAULT_EPS = 1e-6            # strict inequalities become <= -eps*I / >= eps*I
DEFAULT_FEAS_TOL = 1e-7       # certification tolerance on min eigenvalues
ASSEMBLY_TOL = 1e-12          # symmetry / encoder agreement
DEFAULT_MU = 1.0
LAYOUT_COHERENT = "coherent"
LAYOUT_PAPER = "paper-literal"
LAYOUTS = (LAYOUT_COHERENT, LAYOUT_PAPER)

FAMILY_POSITIVITY = "G1"
FAMILY_SLACK = "G2"
FAMILY_JUMP = "G3"
FAMILY_STABILITY = "G4stab"
FAMILY_ROBUSTNESS = "G4rob"
FAMILIES = (FAMILY_POSITIVITY, FAMILY_SLACK, FAMILY_JUMP, FAMILY_STABILITY, FAMILY_ROBUSTNESS)

SENSE_PSD = "psd"   # block >= margin * I
SENSE_NSD = "nsd"   # block <= -margin * I

# Solve statuses
STATUS_FEASIBLE = "Feasible"
STATUS_INFEASIBLE = "Infeasible"
STATUS_ILL_POSED = "IllPosed"
STATUS_NUMERICAL = "NumericalTrouble"
PREFERRED_SOLVERS = ("CLARABEL", "SCS")

# Jacobi sweeps
JACOBI_MAX_SWEEPS = 100
JACOBI_REL_TOL = 1e-15
JACOBI_SMALL_ANGLE = 1e-150
# off-diagonal mass still above this after the last sweep is a failure
JACOBI_STALL_TOL = 1e-10

# ---------- Membership functions

MEMBERSHIP_TOL = 1e-9         # allowed excursion outside [0, 1] and of |sum - 1|
MEMBERSHIP_SAMPLES = 100      # validation grid size per subsystem
MEMBERSHIP_SAMPLE_SPAN = 5.0  # grid covers [-span, span]^n_i
MEMBERSHIP_SEED = 0

MEMBERSHIP_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<state>x\[\s*(?P<state_idx>\d+)\s*\])"
    r"|(?P<onem>one_minus\(\s*(?P<onem_idx>\d+)\s*\))"
    r"|(?P<func>sin|cos)(?=\s*\()"
    r"|(?P<square>\^\s*2)"
    r"|(?P<op>[-+*()])"
    r")"
)

# ---------- Simulation

DEFAULT_DT = 1e-3
DEFAULT_T_END = 30.0
DEFAULT_SIGMA = 0.01
DEFAULT_RUNS = 20
DEFAULT_SEED = 12345
DIVERGENCE_BOUND = 1e9
CONDITION_WARN = 1e8

# ---------- Verification

LYAP_REL_TOL = 1e-8
LYAP_ABS_TOL = 1e-10
JUMP_REL_TOL = 1e-6
SETTLE_TIME = 25.0
SETTLE_BOUND = 1e-3

# ---------- System file schema (allowed keys per section)

SYSTEM_KEYS = {"system", "subsystems"}
SYSTEM_HEADER_KEYS = {"name"}
SUBSYSTEM_KEYS = {
    "name", "state_dim", "output_dim", "input_dim", "disturbance_dim",
    "initial_state", "switching", "modes",
}
MODE_KEYS = {"membership", "lambda", "rules"}
RULE_KEYS = {"A", "B", "Bw", "C", "coupling"}
COUPLING_KEYS = {"F", "Bw"}
SWITCHING_KEYS = {"kind", "schedule", "frontiers", "initial_mode"}
FRONTIER_KEYS = {"c", "d"}
SWITCH_SCHEDULE = "schedule"
SWITCH_HYSTERESIS = "hysteresis"

# ---------- Bundled example reproduction

REPRO_ZETA2 = (1.7, 1.5)
REPRO_LAYOUT = "both"
