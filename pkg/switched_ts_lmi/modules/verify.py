"""
A-posteriori certification of a synthesized ControllerSet.

Checks (each with its tolerance stored in the report):
- lmi_residuals     every block of every family, Jacobi min eigenvalue
- lyapunov_decrease zero-noise run, V non-increasing between switches
- jump_ratio        v+ / v- <= mu at every observed switch
- settling          ||x_i||_inf small after the settle time
- hinf              seeded noisy runs from zero state, ratio <= zeta2_i
Vertex spectra are recorded as a diagnostic only.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .constants import (
    DEFAULT_DT, DEFAULT_FEAS_TOL, DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_SIGMA, DEFAULT_T_END,
    JUMP_REL_TOL, LYAP_ABS_TOL, LYAP_REL_TOL, SETTLE_BOUND, SETTLE_TIME,
)
from .controller import ControllerSet, closed_loop_gain
from .debug_logger import CheckEvent, DebugLogger
from .errors import SynthesisToolError, SimulationDivergenceError
from .lmi import assemble_program
from .model import SystemSpec
from .sdp import residual_check
from .sim import SimConfig, Trajectory, hinf_metrics, simulate, white_noise, zero_states


@dataclass
class VerifyConfig:
    dt: float = DEFAULT_DT
    t_end: float = DEFAULT_T_END
    sigma: float = DEFAULT_SIGMA
    runs: int = DEFAULT_RUNS
    seed: int = DEFAULT_SEED
    jobs: int = 1
    feas_tol: float = DEFAULT_FEAS_TOL
    settle_time: float = SETTLE_TIME
    settle_bound: float = SETTLE_BOUND
    initial_states: Optional[List[List[float]]] = None


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: Optional[float]
    tolerance: float
    detail: str = ""
    skipped: bool = False


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)
    lmi_residuals: Dict[str, Dict[str, object]] = field(default_factory=dict)
    lyapunov: Dict[str, object] = field(default_factory=dict)
    jumps: List[Dict[str, object]] = field(default_factory=list)
    settling: Dict[str, object] = field(default_factory=dict)
    hinf: List[Dict[str, object]] = field(default_factory=list)
    spectra: List[Dict[str, object]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if not c.skipped)

    def check(self, name: str) -> Optional[CheckResult]:
        return next((c for c in self.checks if c.name == name), None)


# ---------- Individual checks

def _residual_check(system: SystemSpec, ctrl: ControllerSet, tol: float, report: VerificationReport):
    try:
        program = assemble_program(system, ctrl.options)
        res = residual_check(program, ctrl.assignment, tol)
    except (SynthesisToolError, KeyError) as e:
        report.checks.append(CheckResult("lmi_residuals", False, None, tol, f"cannot evaluate: {e}"))
        return
    for fam, b in res.worst_by_family().items():
        report.lmi_residuals[fam] = {"label": b.label, "min_eig": b.min_eig, "margin": b.margin,
                                     "passed": all(x.passed for x in res.blocks if x.family == fam)}
    worst = min((b.min_eig - b.margin for b in res.blocks), default=0.0)
    fails = res.failures()
    detail = f"{len(res.blocks)} blocks" + (f", {len(fails)} failing (first {fails[0].label})" if fails else "")
    report.checks.append(CheckResult("lmi_residuals", res.ok, worst, tol, detail))


def lyapunov_increases(traj: Trajectory) -> Tuple[int, float, int]:
    """(count, worst increase, pairs checked) over consecutive samples without a mode change."""
    count, worst, checked = 0, 0.0, 0
    V = traj.V
    for k in range(traj.samples - 1):
        if not np.array_equal(traj.modes[k], traj.modes[k + 1]):
            continue
        checked += 1
        if V[k + 1] > V[k] * (1.0 + LYAP_REL_TOL) + LYAP_ABS_TOL:
            count += 1
            worst = max(worst, float(V[k + 1] - V[k]))
    return count, worst, checked


def _stability_checks(system: SystemSpec, ctrl: ControllerSet, cfg: VerifyConfig,
                      report: VerificationReport, dbg: DebugLogger):
    init = None if cfg.initial_states is None else [np.asarray(x, dtype=float) for x in cfg.initial_states]
    try:
        traj = simulate(system, ctrl, SimConfig(t_end=cfg.t_end, dt=cfg.dt, initial_states=init), dbg)
    except SimulationDivergenceError as e:
        msg = f"diverged: {e}"
        for name, tol in (("lyapunov_decrease", LYAP_REL_TOL), ("jump_ratio", JUMP_REL_TOL),
                          ("settling", cfg.settle_bound)):
            report.checks.append(CheckResult(name, False, math.inf, tol, msg))
        return

    count, worst, checked = lyapunov_increases(traj)
    report.lyapunov = {"increases": count, "worst_increase": worst, "pairs_checked": checked,
                       "rel_tol": LYAP_REL_TOL, "abs_tol": LYAP_ABS_TOL, "V0": float(traj.V[0])}
    report.checks.append(CheckResult("lyapunov_decrease", count == 0, worst, LYAP_REL_TOL,
                                     f"{count} increase(s) over {checked} between-switch steps"))

    worst_ratio = 0.0
    all_ok = True
    for ev in traj.switches:
        mu = ctrl.options.mu_for(ev.subsystem, ev.from_mode, ev.to_mode)
        ok = ev.v_plus <= mu * ev.v_minus * (1.0 + JUMP_REL_TOL) + LYAP_ABS_TOL
        ratio = ev.jump_ratio
        all_ok = all_ok and ok
        worst_ratio = max(worst_ratio, ratio / mu if math.isfinite(ratio) else math.inf)
        report.jumps.append({"t": ev.t, "subsystem": ev.subsystem + 1, "from": ev.from_mode + 1,
                             "to": ev.to_mode + 1, "ratio": ratio, "mu": mu, "passed": ok})
    detail = f"{len(traj.switches)} switch(es)" if traj.switches else "no switches (vacuous)"
    report.checks.append(CheckResult("jump_ratio", all_ok, worst_ratio, JUMP_REL_TOL, detail))

    late = traj.t >= cfg.settle_time
    if not late.any():
        report.checks.append(CheckResult("settling", True, None, cfg.settle_bound,
                                         "horizon ends before settle time", skipped=True))
        return
    per = [float(np.max(np.abs(x[late]))) for x in traj.x]
    worst_settle = max(per)
    report.settling = {"settle_time": cfg.settle_time, "bound": cfg.settle_bound, "worst_inf_norm": per}
    report.checks.append(CheckResult("settling", worst_settle <= cfg.settle_bound, worst_settle,
                                     cfg.settle_bound, f"max |x| for t >= {cfg.settle_time:g}"))


def hinf_run_wrapper(args_tuple):
    """
    One seeded noisy run from zero state, pool-friendly.
    Returns (success, run index, per-subsystem state ratios or error message).
    """
    system, ctrl, cfg, run = args_tuple
    try:
        sim_cfg = SimConfig(t_end=cfg.t_end, dt=cfg.dt,
                            noise=white_noise(system, cfg.sigma, cfg.seed + run * system.n),
                            initial_states=zero_states(system))
        traj = simulate(system, ctrl, sim_cfg)
        return (True, run, [m.ratio_state for m in hinf_metrics(traj)])
    except Exception as e:
        return (False, run, str(e))


def _hinf_check(system: SystemSpec, ctrl: ControllerSet, cfg: VerifyConfig, report: VerificationReport):
    zeta2 = ctrl.zeta2()
    if system.n < 2 or zeta2 is None:
        report.checks.append(CheckResult("hinf", True, None, 0.0, "no attenuation level for a single subsystem",
                                         skipped=True))
        return
    work = [(system, ctrl, cfg, r) for r in range(cfg.runs)]
    jobs = multiprocessing.cpu_count() if cfg.jobs == -1 else cfg.jobs
    if jobs <= 1:
        results = [hinf_run_wrapper(w) for w in work]
    else:
        with multiprocessing.Pool(processes=jobs) as pool:
            results = pool.map(hinf_run_wrapper, work)
    failed = [(run, msg) for ok, run, msg in results if not ok]
    ratios = [[float(r[i]) for ok, _, r in results if ok] for i in range(system.n)]
    worst_norm = 0.0
    passed = not failed
    for i in range(system.n):
        worst = max(ratios[i], default=math.inf)
        within = all(r <= zeta2[i] for r in ratios[i])
        passed = passed and within
        worst_norm = max(worst_norm, worst / zeta2[i])
        report.hinf.append({"subsystem": i + 1, "bound": zeta2[i], "ratios": ratios[i],
                            "worst": worst, "passed": within})
    detail = f"{cfg.runs} run(s), sigma={cfg.sigma:g}, horizon {cfg.t_end:g}s"
    if failed:
        detail += f"; {len(failed)} run(s) failed (first: run {failed[0][0]}: {failed[0][1]})"
    report.checks.append(CheckResult("hinf", passed, worst_norm, 1.0, detail))


def closed_loop_vertex_spectra(system: SystemSpec, ctrl: ControllerSet) -> List[Dict[str, object]]:
    """Eigenvalues of A_s + B_s K[k] M[k]^-1 C_s for every (i, j, s, k); diagnostic only."""
    out = []
    for i, sub in enumerate(system.subsystems):
        for j, mode in enumerate(sub.modes):
            for k in range(mode.rule_count):
                gain = closed_loop_gain(ctrl, i, j, k)
                for s, rule in enumerate(mode.rules):
                    eig = np.linalg.eigvals(rule.A + rule.B @ gain @ rule.C)
                    out.append({
                        "subsystem": i + 1, "mode": j + 1, "rule": s + 1, "gain": k + 1,
                        "real": [float(v) for v in eig.real], "imag": [float(v) for v in eig.imag],
                        "unstable": bool(np.any(eig.real >= 0.0)),
                    })
    return out


def certify(system: SystemSpec, ctrl: ControllerSet, cfg: Optional[VerifyConfig] = None,
            dbg: Optional[DebugLogger] = None) -> VerificationReport:
    cfg = cfg or VerifyConfig()
    dbg = dbg or DebugLogger(False)
    report = VerificationReport()
    _residual_check(system, ctrl, cfg.feas_tol, report)
    _stability_checks(system, ctrl, cfg, report, dbg)
    _hinf_check(system, ctrl, cfg, report)
    report.spectra = closed_loop_vertex_spectra(system, ctrl)
    for c in report.checks:
        dbg.log_check(CheckEvent(c.name, c.passed, c.worst if c.worst is not None else float("nan"),
                                 c.tolerance, c.detail))
    unstable = sum(1 for s in report.spectra if s["unstable"])
    if unstable:
        dbg.warn(f"{unstable} vertex closed-loop matrices have eigenvalues with non-negative real part")
    return report


# ---------- Serialisation and text output

def json_ready(value):
    """Replace non-finite floats with None so the result is strict JSON."""
    if isinstance(value, dict):
        return {k: json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def report_to_json(report: VerificationReport) -> str:
    data = asdict(report)
    data["ok"] = report.ok
    return json.dumps(json_ready(data), indent=2, allow_nan=False) + "\n"


def report_from_json(text: str) -> VerificationReport:
    data = json.loads(text)
    data.pop("ok", None)
    checks = [CheckResult(**c) for c in data.pop("checks", [])]
    return VerificationReport(checks=checks, **data)


def format_report(report: VerificationReport) -> str:
    lines = []
    for c in report.checks:
        if c.skipped:
            lines.append(f"[skip] {c.name}: {c.detail}")
            continue
        mark = "[✓]" if c.passed else "[x]"
        worst = "n/a" if c.worst is None else f"{c.worst:.3e}"
        lines.append(f"{mark} {c.name}: worst={worst} tol={c.tolerance:.1e}")
        if c.detail:
            lines.append(f"    ↳ {c.detail}")
    unstable = sum(1 for s in report.spectra if s["unstable"])
    lines.append(f"    ↳ vertex spectra: {len(report.spectra)} recorded, {unstable} with Re >= 0 (diagnostic)")
    lines.append("[✓] verdict: PASS" if report.ok else "[x] verdict: FAIL")
    return "\n".join(lines) + "\n"
