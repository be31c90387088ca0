"""
End-to-end synthesis and online evaluation of the switched non-PDC law

    u_i = (sum_k h_k K[i,j,k]) (sum_k h_k M[i,j,k])^-1 y_i

where M is X5 under the coherent layout and X9 under the paper-literal one.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constants import CONDITION_WARN, LAYOUT_COHERENT, STATUS_FEASIBLE, STATUS_INFEASIBLE
from .debug_logger import DebugLogger, SolveEvent
from .errors import (
    IndefiniteMatrixError, InfeasibleError, InvalidOptionError, SolverError,
    SystemParseError, ValidationFailedError,
)
from .lmi import LmiProgram, SynthesisOptions, VarRef, assemble_program, family_counts
from .model import SystemSpec, validate
from .sdp import ResidualReport, SolveResult, decode, encode, residual_check, solve

Key = Tuple[int, int, int]

CONTROLLER_FORMAT = "switched_ts_lmi.controller"
CONTROLLER_VERSION = 1
# wall-clock entries never reach controller files
TIMING_KEYS = {"elapsed", "solve_time"}


@dataclass(frozen=True, eq=False)
class ControllerSet:
    """
    Certified decision-variable assignment plus the tables the control law reads.

    `assignment` holds every variable of the program (K, X1, X5, X9, W, tau and
    zeta2 when minimised) so the LMI residuals can be re-checked later.
    """
    layout: str
    assignment: Dict[VarRef, np.ndarray]
    options: SynthesisOptions
    metadata: Dict[str, object] = field(default_factory=dict)
    gains: Dict[Key, np.ndarray] = field(init=False, repr=False)
    mixing: Dict[Key, np.ndarray] = field(init=False, repr=False)
    X1: Dict[Key, np.ndarray] = field(init=False, repr=False)
    X5: Dict[Key, np.ndarray] = field(init=False, repr=False)
    X9: Dict[Key, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        tables = {f: {} for f in ("K", "X1", "X5", "X9")}
        for ref, value in self.assignment.items():
            if ref.family in tables:
                tables[ref.family][ref.index] = np.atleast_2d(np.asarray(value, dtype=float))
        object.__setattr__(self, "gains", tables["K"])
        object.__setattr__(self, "X1", tables["X1"])
        object.__setattr__(self, "X5", tables["X5"])
        object.__setattr__(self, "X9", tables["X9"])
        object.__setattr__(self, "mixing", tables["X5"] if self.layout == LAYOUT_COHERENT else tables["X9"])

    @property
    def mixing_family(self) -> str:
        return "X5" if self.layout == LAYOUT_COHERENT else "X9"

    def rule_count(self, i: int, j: int) -> int:
        return sum(1 for (a, b, _) in self.gains if a == i and b == j)

    def stack(self, table: Dict[Key, np.ndarray], i: int, j: int) -> List[np.ndarray]:
        return [table[(i, j, k)] for k in range(self.rule_count(i, j))]

    def zeta2(self) -> Optional[List[float]]:
        z = self.metadata.get("zeta2")
        return None if z is None else [float(v) for v in z]


def _blend(h: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    return np.tensordot(h, np.stack(mats), axes=1)


def _factor(m: np.ndarray, what: str):
    try:
        return cho_factor(m)
    except LinAlgError:
        raise IndefiniteMatrixError(f"{what} is not numerically positive definite")


def control_output(ctrl: ControllerSet, i: int, mode: int, h: np.ndarray, y: np.ndarray,
                   dbg: Optional[DebugLogger] = None) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    k_h = _blend(h, ctrl.stack(ctrl.gains, i, mode))
    m_h = _blend(h, ctrl.stack(ctrl.mixing, i, mode))
    factor = _factor(m_h, f"blended mixing block of subsystem {i + 1}, mode {mode + 1}")
    if dbg is not None and dbg.enabled:
        cond = np.linalg.cond(m_h)
        if cond > CONDITION_WARN:
            dbg.warn(f"subsystem {i + 1} mode {mode + 1}: mixing block condition number {cond:.2e}",
                     key=("condition", i, mode))
    return k_h @ cho_solve(factor, np.asarray(y, dtype=float))


def closed_loop_gain(ctrl: ControllerSet, i: int, mode: int, k: int) -> np.ndarray:
    """Vertex gain K[k] M[k]^-1."""
    m = ctrl.mixing[(i, mode, k)]
    return ctrl.gains[(i, mode, k)] @ cho_solve(_factor(m, "mixing block"), np.eye(m.shape[0]))


# ---------- Synthesis

def run_program(system: SystemSpec, options: SynthesisOptions,
                dbg: Optional[DebugLogger] = None) -> Tuple[LmiProgram, SolveResult]:
    dbg = dbg or DebugLogger(False)
    t0 = time.perf_counter()
    program = assemble_program(system, options)
    conic = encode(program)
    dbg.log(SolveEvent("assemble", "ok", f"{len(program.blocks)} blocks, {conic.num_scalars} scalars",
                       time.perf_counter() - t0))
    result = solve(conic, options.feas_tol, options.solver, dbg)
    if result.feasible:
        result.diagnostics["assignment"] = decode(conic, result.point)
    return program, result


def synthesize(system: SystemSpec, options: SynthesisOptions,
               dbg: Optional[DebugLogger] = None) -> ControllerSet:
    """
    Assemble, solve and certify. Raises InfeasibleError (configuration echoed),
    SolverError for NumericalTrouble/IllPosed, LayoutInfeasibleError for
    paper-literal with p != u.
    """
    report = validate(system)
    if not report.ok:
        raise ValidationFailedError(report)
    program, result = run_program(system, options, dbg)
    if result.status == STATUS_INFEASIBLE:
        raise InfeasibleError("LMI conditions are infeasible", configuration=options.to_dict())
    if not result.feasible:
        detail = result.diagnostics.get("message", result.diagnostics.get("raw_status", ""))
        raise SolverError(f"solver returned {result.status} {detail}".strip(), status=result.status)
    assignment = result.diagnostics.pop("assignment")
    residuals = residual_check(program, assignment, options.feas_tol)
    if not residuals.ok:
        worst = residuals.failures()[0]
        raise SolverError(f"uncertified point: {worst.label} min eig {worst.min_eig:.3e}")
    ctrl = ControllerSet(layout=options.layout, assignment=assignment, options=options,
                         metadata=_metadata(system, program, assignment, residuals, result))
    for key, m in ctrl.mixing.items():
        _factor(m, f"{ctrl.mixing_family}[{','.join(str(k + 1) for k in key)}]")
    return ctrl


def _metadata(system: SystemSpec, program: LmiProgram, assignment, residuals: ResidualReport,
              result: SolveResult) -> Dict[str, object]:
    options = program.options
    if options.minimize_zeta and system.n >= 2:
        zeta2 = [float(np.atleast_2d(assignment[VarRef("zeta2", (i,))])[0, 0]) for i in range(system.n)]
    else:
        zeta2 = None if options.zeta2 is None else [float(z) for z in options.zeta2]
    worst = {f: {"label": b.label, "min_eig": b.min_eig, "margin": b.margin}
             for f, b in residuals.worst_by_family().items()}
    return {
        "system": system.name,
        "mixing_block": "X5" if options.layout == LAYOUT_COHERENT else "X9",
        "zeta2": zeta2,
        "block_counts": family_counts(program),
        "num_scalars": program.vars.scalar_count,
        "residuals": worst,
        "solver": {k: v for k, v in result.diagnostics.items()
                   if isinstance(v, (int, float, str)) and k not in TIMING_KEYS},
    }


def attenuation_threshold(system: SystemSpec, options: SynthesisOptions, iterations: int = 12,
                          upper: float = 1.0, dbg: Optional[DebugLogger] = None) -> Tuple[float, List[float]]:
    """
    Bisection over a common scale c applied to the base zeta2 vector (options.zeta2,
    or all ones): returns the smallest certified-feasible c found and c*base.
    Non-Feasible statuses count as infeasible.
    """
    if system.n < 2:
        raise InvalidOptionError("attenuation threshold needs at least two subsystems")
    dbg = dbg or DebugLogger(False)
    base = np.asarray(options.zeta2 if options.zeta2 is not None else [1.0] * system.n, dtype=float)

    def feasible(c: float) -> bool:
        trial = replace(options, zeta2=[float(z) for z in c * base], minimize_zeta=False)
        _, res = run_program(system, trial, dbg)
        dbg.gate(f"zeta2 scale {c:.6g}: {res.status}")
        return res.status == STATUS_FEASIBLE

    hi = upper
    for _ in range(20):
        if feasible(hi):
            break
        hi *= 2.0
    else:
        raise InfeasibleError("no feasible zeta2 scale found", configuration=options.to_dict())
    lo = 0.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi, [float(z) for z in hi * base]


# ---------- Controller files

def controller_to_dict(ctrl: ControllerSet) -> dict:
    return {
        "format": CONTROLLER_FORMAT,
        "version": CONTROLLER_VERSION,
        "layout": ctrl.layout,
        "options": ctrl.options.to_dict(),
        "metadata": ctrl.metadata,
        "variables": [
            {"family": ref.family, "index": [k + 1 for k in ref.index],
             "value": np.atleast_2d(value).tolist()}
            for ref, value in ctrl.assignment.items()
        ],
    }


def controller_from_dict(data: dict) -> ControllerSet:
    if data.get("format") != CONTROLLER_FORMAT:
        raise SystemParseError("not a controller file (missing format tag)")
    options = SynthesisOptions.from_dict(data.get("options", {}))
    assignment = {
        VarRef(v["family"], tuple(k - 1 for k in v["index"])): np.array(v["value"], dtype=float)
        for v in data.get("variables", [])
    }
    return ControllerSet(layout=data.get("layout", options.layout), assignment=assignment,
                         options=options, metadata=data.get("metadata", {}))


def save_controller(ctrl: ControllerSet, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(controller_to_dict(ctrl), indent=2) + "\n", encoding="utf-8")


def load_controller(path: Union[str, Path]) -> ControllerSet:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SystemParseError(e.msg, line=e.lineno, column=e.colno)
    return controller_from_dict(data)


def check_dimensions(system: SystemSpec, ctrl: ControllerSet) -> None:
    """Controller tables must cover every (i, j, k) of the system with matching shapes."""
    for i, sub in enumerate(system.subsystems):
        for j, mode in enumerate(sub.modes):
            if ctrl.rule_count(i, j) != mode.rule_count:
                raise InvalidOptionError(
                    f"controller has {ctrl.rule_count(i, j)} rule(s) for subsystem {i + 1}, mode {j + 1}; "
                    f"system has {mode.rule_count}"
                )
            for k in range(mode.rule_count):
                K = ctrl.gains.get((i, j, k))
                M = ctrl.mixing.get((i, j, k))
                size = sub.output_dim if ctrl.layout == LAYOUT_COHERENT else sub.input_dim
                if (K is None or K.shape != (sub.input_dim, sub.output_dim)
                        or M is None or M.shape != (size, size)):
                    raise InvalidOptionError(
                        f"controller does not match subsystem {i + 1}, mode {j + 1}, rule {k + 1}"
                    )
