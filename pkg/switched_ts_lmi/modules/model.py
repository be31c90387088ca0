"""
Interconnected switched Takagi-Sugeno plant: types, file parsing, validation
and membership evaluation.

Classes:
- RuleSpec, ModeSpec, SubsystemSpec, SystemSpec - the plant description
- TimeSchedule, HysteresisFrontiers - switching rules
- Violation, ValidationReport - validation results

Functions:
- parse_system / serialize_system / load_system - system file I/O
- validate - invariant checks (dimensions, ranges, convex sums)
- membership_eval - convex weight vector of a mode at a state
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import (
    SYSTEM_KEYS, SYSTEM_HEADER_KEYS, SUBSYSTEM_KEYS, MODE_KEYS, RULE_KEYS,
    COUPLING_KEYS, SWITCHING_KEYS, FRONTIER_KEYS, SWITCH_SCHEDULE, SWITCH_HYSTERESIS,
    MEMBERSHIP_TOL, MEMBERSHIP_SAMPLES, MEMBERSHIP_SAMPLE_SPAN, MEMBERSHIP_SEED,
)
from .errors import (
    SystemParseError, UnknownFieldError, DimensionMismatchError, InvalidMembershipError,
)
from .membership import MembershipFn, evaluate_family, reference_cycle


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------- Types

@dataclass(frozen=True, eq=False)
class RuleSpec:
    """Local model of one fuzzy rule; peer dicts are keyed by 0-based subsystem index."""
    A: np.ndarray
    B: np.ndarray
    Bw: np.ndarray
    C: np.ndarray
    F: Dict[int, np.ndarray] = field(default_factory=dict)
    Bw_peer: Dict[int, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ModeSpec:
    rules: List[RuleSpec]
    memberships: List[MembershipFn]
    lambda_bounds: np.ndarray

    @property
    def rule_count(self) -> int:
        return len(self.rules)


@dataclass(frozen=True, eq=False)
class TimeSchedule:
    """Ordered (switch_time, mode) entries; modes are 0-based."""
    entries: List[Tuple[float, int]]

    @property
    def initial_mode(self) -> int:
        if self.entries and self.entries[0][0] <= 0.0:
            return self.entries[0][1]
        return 0


@dataclass(frozen=True, eq=False)
class HysteresisFrontiers:
    """Per-mode affine frontier H_j(x) = c_j^T x + d_j."""
    c: List[np.ndarray]
    d: List[float]
    initial_mode: int = 0

    def value(self, mode: int, x: Sequence[float]) -> float:
        return float(np.dot(self.c[mode], x) + self.d[mode])


SwitchingRule = Union[TimeSchedule, HysteresisFrontiers]


@dataclass(frozen=True, eq=False)
class SubsystemSpec:
    name: str
    state_dim: int
    output_dim: int
    input_dim: int
    disturbance_dim: int
    modes: List[ModeSpec]
    switching: SwitchingRule
    initial_state: np.ndarray

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    @property
    def augmented_dim(self) -> int:
        return self.state_dim + self.output_dim + self.input_dim


@dataclass(frozen=True, eq=False)
class SystemSpec:
    name: str
    subsystems: List[SubsystemSpec]

    @property
    def n(self) -> int:
        return len(self.subsystems)

    @property
    def n_bar(self) -> float:
        if self.n < 2:
            raise ValueError("N-bar = 1/(n-1) is undefined for a single subsystem")
        return 1.0 / (self.n - 1)

    def peers(self, i: int) -> List[int]:
        return [a for a in range(self.n) if a != i]

    def pairs(self) -> List[Tuple[int, int]]:
        """Ordered pairs (i, alpha), alpha != i; empty for n = 1."""
        return [(i, a) for i in range(self.n) for a in range(self.n) if a != i]


@dataclass
class Violation:
    code: str
    where: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"[{self.code}] {self.where}: {self.message}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)
    warnings: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, where: str, message: str):
        self.violations.append(Violation(code, where, message))

    def warn(self, code: str, where: str, message: str):
        self.warnings.append(Violation(code, where, message, severity="warning"))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": [vars(v) for v in self.violations],
            "warnings": [vars(v) for v in self.warnings],
        }


# ---------- Parsing

def _check_keys(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise SystemParseError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise UnknownFieldError(f"{where}: unknown field(s) {', '.join(unknown)}")
    return obj


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SystemParseError(f"{where}: missing field '{key}'")
    return obj[key]


def _number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SystemParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SystemParseError(f"{where}: expected an integer, got {v!r}")
    return v


def _vector(v: Any, where: str) -> np.ndarray:
    if not isinstance(v, list):
        raise SystemParseError(f"{where}: expected a list of numbers")
    return _frozen([_number(x, where) for x in v])


def _matrix(v: Any, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise SystemParseError(f"{where}: expected a matrix literal as a list of rows")
    width = len(v[0])
    if width == 0 or any(len(r) != width for r in v):
        raise SystemParseError(f"{where}: ragged or empty matrix rows")
    return _frozen([[_number(x, where) for x in r] for r in v])


def _peer_index(key: str, n: int, i: int, where: str) -> int:
    try:
        alpha = int(key) - 1
    except ValueError:
        raise UnknownFieldError(f"{where}: coupling key '{key}' is not a subsystem number")
    if not 0 <= alpha < n or alpha == i:
        raise SystemParseError(f"{where}: coupling peer {key} out of range")
    return alpha


def _parse_rule(obj: Any, where: str, n: int, i: int) -> RuleSpec:
    _check_keys(obj, RULE_KEYS, where)
    F: Dict[int, np.ndarray] = {}
    Bw_peer: Dict[int, np.ndarray] = {}
    coupling = obj.get("coupling", {})
    if not isinstance(coupling, dict):
        raise SystemParseError(f"{where}.coupling: expected an object keyed by peer number")
    for key, entry in coupling.items():
        cw = f"{where}.coupling[{key}]"
        alpha = _peer_index(key, n, i, cw)
        _check_keys(entry, COUPLING_KEYS, cw)
        F[alpha] = _matrix(_require(entry, "F", cw), cw + ".F")
        Bw_peer[alpha] = _matrix(_require(entry, "Bw", cw), cw + ".Bw")
    return RuleSpec(
        A=_matrix(_require(obj, "A", where), where + ".A"),
        B=_matrix(_require(obj, "B", where), where + ".B"),
        Bw=_matrix(_require(obj, "Bw", where), where + ".Bw"),
        C=_matrix(_require(obj, "C", where), where + ".C"),
        F=F,
        Bw_peer=Bw_peer,
    )


def _parse_mode(obj: Any, where: str, n: int, i: int) -> ModeSpec:
    _check_keys(obj, MODE_KEYS, where)
    rules_raw = _require(obj, "rules", where)
    if not isinstance(rules_raw, list):
        raise SystemParseError(f"{where}.rules: expected a list")
    rules = [_parse_rule(r, f"{where}.rule[{s + 1}]", n, i) for s, r in enumerate(rules_raw)]
    memb_raw = _require(obj, "membership", where)
    if not isinstance(memb_raw, list) or not all(isinstance(e, str) for e in memb_raw):
        raise SystemParseError(f"{where}.membership: expected a list of expressions")
    memberships = [MembershipFn.parse(e) for e in memb_raw]
    lam = obj.get("lambda", 0.0)
    if isinstance(lam, list):
        lambdas = _vector(lam, where + ".lambda")
    else:
        lambdas = _frozen([_number(lam, where + ".lambda")] * len(rules))
    return ModeSpec(rules=rules, memberships=memberships, lambda_bounds=lambdas)


def _parse_switching(obj: Any, where: str) -> SwitchingRule:
    _check_keys(obj, SWITCHING_KEYS, where)
    kind = _require(obj, "kind", where)
    initial = _int(obj.get("initial_mode", 1), where + ".initial_mode") - 1
    if kind == SWITCH_SCHEDULE:
        raw = _require(obj, "schedule", where)
        if not isinstance(raw, list) or not all(isinstance(e, list) and len(e) == 2 for e in raw):
            raise SystemParseError(f"{where}.schedule: expected a list of [time, mode] pairs")
        return TimeSchedule([(_number(t, where), _int(m, where) - 1) for t, m in raw])
    if kind == SWITCH_HYSTERESIS:
        raw = _require(obj, "frontiers", where)
        if not isinstance(raw, list):
            raise SystemParseError(f"{where}.frontiers: expected a list")
        cs, ds = [], []
        for j, fr in enumerate(raw):
            fw = f"{where}.frontier[{j + 1}]"
            _check_keys(fr, FRONTIER_KEYS, fw)
            cs.append(_vector(_require(fr, "c", fw), fw + ".c"))
            ds.append(_number(fr.get("d", 0.0), fw + ".d"))
        return HysteresisFrontiers(c=cs, d=ds, initial_mode=initial)
    raise SystemParseError(f"{where}.kind: unknown switching kind '{kind}'")


def _parse_subsystem(obj: Any, where: str, n: int, i: int) -> SubsystemSpec:
    _check_keys(obj, SUBSYSTEM_KEYS, where)
    modes_raw = _require(obj, "modes", where)
    if not isinstance(modes_raw, list):
        raise SystemParseError(f"{where}.modes: expected a list")
    return SubsystemSpec(
        name=str(obj.get("name", f"S{i + 1}")),
        state_dim=_int(_require(obj, "state_dim", where), where + ".state_dim"),
        output_dim=_int(_require(obj, "output_dim", where), where + ".output_dim"),
        input_dim=_int(_require(obj, "input_dim", where), where + ".input_dim"),
        disturbance_dim=_int(_require(obj, "disturbance_dim", where), where + ".disturbance_dim"),
        modes=[_parse_mode(m, f"{where}.mode[{j + 1}]", n, i) for j, m in enumerate(modes_raw)],
        switching=_parse_switching(_require(obj, "switching", where), where + ".switching"),
        initial_state=_vector(_require(obj, "initial_state", where), where + ".initial_state"),
    )


def parse_system(document: str, strict: bool = True) -> SystemSpec:
    """
    Parse a system file (JSON structured text) into a SystemSpec.

    With strict=True the first dimension problem raises DimensionMismatchError;
    with strict=False dimension problems are left for validate() to list.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise SystemParseError(e.msg, line=e.lineno, column=e.colno)
    _check_keys(data, SYSTEM_KEYS, "document")
    header = _check_keys(_require(data, "system", "document"), SYSTEM_HEADER_KEYS, "system")
    subs_raw = _require(data, "subsystems", "document")
    if not isinstance(subs_raw, list):
        raise SystemParseError("subsystems: expected a list")
    n = len(subs_raw)
    system = SystemSpec(
        name=str(header.get("name", "system")),
        subsystems=[_parse_subsystem(s, f"subsystem[{i + 1}]", n, i) for i, s in enumerate(subs_raw)],
    )
    if strict:
        report = ValidationReport()
        _structural_checks(system, report)
        for v in report.violations:
            if v.code == "dimension":
                raise DimensionMismatchError(f"{v.where}: {v.message}")
    return system


def load_system(path: Union[str, Path], strict: bool = True) -> SystemSpec:
    return parse_system(Path(path).read_text(encoding="utf-8"), strict=strict)


def serialize_system(system: SystemSpec) -> str:
    """Inverse of parse_system; floats use the shortest round-trip repr."""
    subs = []
    for i, sub in enumerate(system.subsystems):
        modes = []
        for mode in sub.modes:
            rules = []
            for rule in mode.rules:
                entry = {"A": rule.A.tolist(), "B": rule.B.tolist(),
                         "Bw": rule.Bw.tolist(), "C": rule.C.tolist()}
                if rule.F:
                    entry["coupling"] = {
                        str(a + 1): {"F": rule.F[a].tolist(), "Bw": rule.Bw_peer[a].tolist()}
                        for a in sorted(rule.F)
                    }
                rules.append(entry)
            modes.append({
                "membership": [m.expression for m in mode.memberships],
                "lambda": mode.lambda_bounds.tolist(),
                "rules": rules,
            })
        sw = sub.switching
        if isinstance(sw, TimeSchedule):
            switching = {"kind": SWITCH_SCHEDULE, "schedule": [[t, m + 1] for t, m in sw.entries]}
        else:
            switching = {
                "kind": SWITCH_HYSTERESIS,
                "initial_mode": sw.initial_mode + 1,
                "frontiers": [{"c": c.tolist(), "d": d} for c, d in zip(sw.c, sw.d)],
            }
        subs.append({
            "name": sub.name,
            "state_dim": sub.state_dim,
            "output_dim": sub.output_dim,
            "input_dim": sub.input_dim,
            "disturbance_dim": sub.disturbance_dim,
            "initial_state": sub.initial_state.tolist(),
            "switching": switching,
            "modes": modes,
        })
    return json.dumps({"system": {"name": system.name}, "subsystems": subs}, indent=2) + "\n"


# ---------- Validation

def _shape_check(report: ValidationReport, where: str, mat: np.ndarray, shape: Tuple[int, int]):
    if mat.shape != shape:
        report.add("dimension", where, f"shape {mat.shape[0]}x{mat.shape[1]}, expected {shape[0]}x{shape[1]}")


def _iter_modes(system: SystemSpec) -> Iterator[Tuple[int, SubsystemSpec, int, ModeSpec, str]]:
    for i, sub in enumerate(system.subsystems):
        for j, mode in enumerate(sub.modes):
            yield i, sub, j, mode, f"subsystem[{i + 1}].mode[{j + 1}]"


def _structural_checks(system: SystemSpec, report: ValidationReport) -> None:
    if system.n < 1:
        report.add("range", "system", "at least one subsystem is required")
    for i, sub in enumerate(system.subsystems):
        where = f"subsystem[{i + 1}]"
        for label in ("state_dim", "output_dim", "input_dim", "disturbance_dim"):
            if getattr(sub, label) < 1:
                report.add("dimension", where, f"{label} must be strictly positive")
        if sub.mode_count < 1:
            report.add("range", where, "at least one mode is required")
        if sub.initial_state.shape != (sub.state_dim,):
            report.add("dimension", where + ".initial_state",
                       f"length {sub.initial_state.size}, expected {sub.state_dim}")
        _switching_checks(sub, where + ".switching", report)
    for i, sub, j, mode, where in _iter_modes(system):
        ni, pi, ui, vi = sub.state_dim, sub.output_dim, sub.input_dim, sub.disturbance_dim
        r = mode.rule_count
        if r < 1:
            report.add("range", where, "at least one rule is required")
        if len(mode.memberships) != r:
            report.add("dimension", where + ".membership", f"{len(mode.memberships)} functions for {r} rules")
        if mode.lambda_bounds.shape != (r,):
            report.add("dimension", where + ".lambda", f"{mode.lambda_bounds.size} bounds for {r} rules")
        for s, rule in enumerate(mode.rules):
            rw = f"{where}.rule[{s + 1}]"
            _shape_check(report, rw + ".A", rule.A, (ni, ni))
            _shape_check(report, rw + ".B", rule.B, (ni, ui))
            _shape_check(report, rw + ".Bw", rule.Bw, (ni, vi))
            _shape_check(report, rw + ".C", rule.C, (pi, ni))
            for alpha in system.peers(i):
                peer = system.subsystems[alpha]
                cw = f"{rw}.coupling[{alpha + 1}]"
                if alpha not in rule.F:
                    report.add("dimension", cw, "missing coupling entry")
                    continue
                _shape_check(report, cw + ".F", rule.F[alpha], (ni, peer.state_dim))
                _shape_check(report, cw + ".Bw", rule.Bw_peer[alpha], (ni, peer.disturbance_dim))
        for k, fn in enumerate(mode.memberships):
            if fn.max_state_index >= ni:
                report.add("membership", f"{where}.membership[{k + 1}]",
                           f"x[{fn.max_state_index + 1}] exceeds state dimension {ni}")
            bad = [ref for ref in fn.references if not 0 <= ref < len(mode.memberships) or ref == k]
            if bad:
                report.add("membership", f"{where}.membership[{k + 1}]",
                           f"one_minus reference {bad[0] + 1} is out of range or self-referential")
        cycle = reference_cycle(mode.memberships)
        if cycle:
            report.add("membership", where + ".membership",
                       "one_minus reference cycle " + " -> ".join(str(c + 1) for c in cycle))


def _switching_checks(sub: SubsystemSpec, where: str, report: ValidationReport) -> None:
    sw = sub.switching
    m = sub.mode_count
    if isinstance(sw, TimeSchedule):
        if not sw.entries:
            report.add("switching", where, "empty schedule")
        times = [t for t, _ in sw.entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            report.add("switching", where, "switch times must be strictly increasing")
        for t, mode in sw.entries:
            if not 0 <= mode < m:
                report.add("switching", where, f"mode {mode + 1} at t={t} out of range 1..{m}")
    else:
        if len(sw.c) != m:
            report.add("switching", where, f"{len(sw.c)} frontiers for {m} modes")
        for j, c in enumerate(sw.c):
            if c.shape != (sub.state_dim,):
                report.add("dimension", f"{where}.frontier[{j + 1}]",
                           f"coefficient length {c.size}, expected {sub.state_dim}")
        if not 0 <= sw.initial_mode < m:
            report.add("switching", where, f"initial mode {sw.initial_mode + 1} out of range 1..{m}")


def sample_states(dim: int, count: int = MEMBERSHIP_SAMPLES) -> np.ndarray:
    """Deterministic validation grid over [-span, span]^dim, origin included."""
    rng = np.random.default_rng(MEMBERSHIP_SEED)
    pts = rng.uniform(-MEMBERSHIP_SAMPLE_SPAN, MEMBERSHIP_SAMPLE_SPAN, size=(count, dim))
    pts[0] = 0.0
    return pts


def validate(system: SystemSpec) -> ValidationReport:
    """
    Check every invariant of the plant description. Violations are data:
    an empty report means all dimension, range and convex-sum checks pass.
    """
    report = ValidationReport()
    _structural_checks(system, report)
    broken_modes = {v.where.split(".rule")[0].split(".membership")[0] for v in report.violations}
    for i, sub, j, mode, where in _iter_modes(system):
        for s, lam in enumerate(mode.lambda_bounds):
            if lam > 0:
                report.warn("lambda_positive", f"{where}.lambda[{s + 1}]",
                            f"lambda={lam:g} > 0 cannot bound the derivative of a non-constant membership")
        if where in broken_modes or f"subsystem[{i + 1}]" in broken_modes or mode.rule_count < 1:
            continue
        worst_range, worst_sum = 0.0, 0.0
        for x in sample_states(sub.state_dim):
            h = evaluate_family(mode.memberships, x)
            worst_range = max(worst_range, float(np.max(-h)), float(np.max(h - 1.0)))
            worst_sum = max(worst_sum, abs(float(h.sum()) - 1.0))
        if worst_range > MEMBERSHIP_TOL:
            report.add("membership_range", where + ".membership",
                       f"value outside [0, 1] by {worst_range:.3e} on the sample grid")
        if worst_sum > MEMBERSHIP_TOL:
            report.add("convex_sum", where + ".membership",
                       f"memberships sum off 1 by {worst_sum:.3e} on the sample grid")
    return report


# ---------- Membership evaluation

def membership_eval(subsystem: SubsystemSpec, mode: int, state: Sequence[float]) -> np.ndarray:
    """Convex weight vector h of `mode` at `state` (renormalised within 1e-9)."""
    x = np.asarray(state, dtype=float)
    if x.shape != (subsystem.state_dim,):
        raise InvalidMembershipError(f"state length {x.size}, expected {subsystem.state_dim}")
    h = evaluate_family(subsystem.modes[mode].memberships, x)
    if np.any(h < -MEMBERSHIP_TOL) or np.any(h > 1.0 + MEMBERSHIP_TOL):
        raise InvalidMembershipError(f"membership value outside [0, 1]: {h.tolist()} at x={x.tolist()}")
    h = np.clip(h, 0.0, 1.0)
    total = float(h.sum())
    if abs(total - 1.0) > MEMBERSHIP_TOL:
        raise InvalidMembershipError(f"memberships sum to {total!r} at x={x.tolist()}")
    return h / total


def blend(weights: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Convex blend sum_s h_s M_s."""
    out = weights[0] * mats[0]
    for w, m in zip(weights[1:], mats[1:]):
        out = out + w * m
    return out
