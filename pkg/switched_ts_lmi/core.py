#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
switched_ts_lmi.core - command-line orchestration

    validate  check a system file against every invariant
    synth     assemble the LMI families, solve, certify, write controller.json
    simulate  closed-loop (or open-loop) run, write trajectory.csv + summary.json
    verify    certify a stored controller, write verification_report.json
    repro     validate -> synth (both layouts) -> simulate -> verify on the bundled example

Library code raises SynthesisToolError subclasses; this module is the only
place that turns them into exit codes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .modules.constants import (
    BUNDLED_EXAMPLE, CONTROLLER_FILE, DEFAULT_DT, DEFAULT_EPS, DEFAULT_FEAS_TOL, DEFAULT_MU,
    DEFAULT_OUT_DIR, DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_SIGMA, DEFAULT_T_END, EXIT_INFEASIBLE,
    EXIT_IO_PARSE, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, LAYOUTS, LAYOUT_COHERENT,
    REPORT_JSON, REPRO_LAYOUT, REPRO_ZETA2, RUN_CONFIG_FILE, SUMMARY_JSON, SYNTH_LOG_FILE,
    TRAJECTORY_CSV,
)
from .modules.controller import (
    ControllerSet, load_controller, save_controller, synthesize,
)
from .modules.debug_logger import DebugLogger
from .modules.errors import (
    InfeasibleError, InvalidOptionError, LayoutInfeasibleError, SimulationDivergenceError,
    SynthesisToolError, SystemParseError, ValidationFailedError,
)
from .modules.lmi import SynthesisOptions
from .modules.model import SystemSpec, load_system, validate
from .modules.sim import SimConfig, hinf_metrics, simulate, trajectory_summary, white_noise, write_trajectory_csv
from .modules.verify import VerifyConfig, certify, format_report, json_ready, report_to_json

DATA_DIR = Path(__file__).resolve().parent / "data"


def bundled_example() -> Path:
    return DATA_DIR / BUNDLED_EXAMPLE


# ---------- Run configuration

@dataclass
class RunConfig:
    system: Optional[str] = None
    controller: Optional[str] = None
    out: str = DEFAULT_OUT_DIR
    layout: Optional[str] = None      # coherent | paper-literal | both
    zeta: Optional[str] = None          # "v1,v2,..." or "minimize"
    mu: float = DEFAULT_MU
    lambda_: Optional[float] = None
    eps: float = DEFAULT_EPS
    feas_tol: float = DEFAULT_FEAS_TOL
    solver: Optional[str] = None
    dt: float = DEFAULT_DT
    tend: float = DEFAULT_T_END
    sigma: float = DEFAULT_SIGMA
    seed: int = DEFAULT_SEED
    runs: int = DEFAULT_RUNS
    stride: int = 1
    jobs: int = 1
    debug: bool = False

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise SystemParseError(f"config {path.name}: {e.msg}", line=e.lineno, column=e.colno)
        if "lambda" in data:
            data["lambda_"] = data.pop("lambda")
        if isinstance(data.get("zeta"), list):
            data["zeta"] = ",".join(str(z) for z in data["zeta"])
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise InvalidOptionError(f"config {path.name}: unknown key(s) {', '.join(unknown)}")
        return cls(**data)

    def overlay(self, args: argparse.Namespace) -> "RunConfig":
        """Flags given on the command line win over file values."""
        for f in fields(self):
            value = getattr(args, f.name, None)
            if value is not None and value is not False:
                setattr(self, f.name, value)
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["lambda"] = data.pop("lambda_")
        return data

    def zeta2(self) -> Tuple[Optional[List[float]], bool]:
        if self.zeta is None:
            return None, False
        if self.zeta.strip().lower() == "minimize":
            return None, True
        try:
            return [float(v) for v in self.zeta.split(",")], False
        except ValueError:
            raise InvalidOptionError(f"--zeta expects comma-separated values or 'minimize', got '{self.zeta}'")

    def synthesis_options(self, layout: str) -> SynthesisOptions:
        zeta2, minimize = self.zeta2()
        return SynthesisOptions(layout=layout, eps=self.eps, mu=self.mu, lambda_override=self.lambda_,
                                zeta2=zeta2, minimize_zeta=minimize, solver=self.solver,
                                feas_tol=self.feas_tol)

    def layouts(self, default: str = LAYOUT_COHERENT) -> List[str]:
        layout = self.layout or default
        if layout == "both":
            return list(LAYOUTS)
        if layout not in LAYOUTS:
            raise InvalidOptionError(f"unknown layout '{layout}'")
        return [layout]

    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(dt=self.dt, t_end=self.tend, sigma=self.sigma, runs=self.runs,
                            seed=self.seed, jobs=self.jobs, feas_tol=self.feas_tol)


def _prepare_out(cfg: RunConfig) -> Path:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / RUN_CONFIG_FILE).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    return out_dir


def _load(cfg: RunConfig) -> SystemSpec:
    if not cfg.system:
        raise InvalidOptionError("--system is required")
    path = Path(cfg.system)
    if not path.exists():
        raise FileNotFoundError(f"system file not found: {path}")
    system = load_system(path)
    report = validate(system)
    if not report.ok:
        for v in report.violations:
            print(f"[x] {v}", file=sys.stderr)
        raise ValidationFailedError(report)
    return system


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(json_ready(data), indent=2, allow_nan=False) + "\n", encoding="utf-8")


# ---------- Commands

def cmd_validate(system_path: str) -> int:
    path = Path(system_path)
    if not path.exists():
        print(f"[x] system file not found: {path}", file=sys.stderr)
        return EXIT_IO_PARSE
    system = load_system(path, strict=False)
    report = validate(system)
    for w in report.warnings:
        print(f"[warn] {w}")
    if not report.ok:
        for v in report.violations:
            print(f"[x] {v}", file=sys.stderr)
        print(f"    ↳ {len(report.violations)} violation(s)")
        return EXIT_VALIDATION
    dims = ", ".join(f"{s.name}: n={s.state_dim} p={s.output_dim} u={s.input_dim} v={s.disturbance_dim} "
                     f"m={s.mode_count}" for s in system.subsystems)
    print(f"[✓] {path.name} is valid ({system.n} subsystem(s))")
    print(f"    ↳ {dims}")
    return EXIT_OK


def _synth_layouts(system: SystemSpec, cfg: RunConfig, dbg: DebugLogger,
                   out_dir: Path) -> Tuple[Optional[ControllerSet], Dict[str, dict], int]:
    """Try each requested layout in order; first certified controller wins."""
    attempts: Dict[str, dict] = {}
    codes: List[int] = []
    for layout in cfg.layouts():
        options = cfg.synthesis_options(layout)
        try:
            ctrl = synthesize(system, options, dbg)
        except (InfeasibleError, LayoutInfeasibleError) as e:
            print(f"[warn] {layout}: infeasible ({e})")
            attempts[layout] = {"status": "Infeasible", "message": str(e)}
            codes.append(EXIT_INFEASIBLE)
            continue
        except SynthesisToolError as e:
            if isinstance(e, InvalidOptionError):
                raise
            print(f"[warn] {layout}: {e}")
            attempts[layout] = {"status": getattr(e, "status", "NumericalTrouble"), "message": str(e)}
            codes.append(e.exit_code)
            continue
        attempts[layout] = {"status": "Feasible", **ctrl.metadata}
        counts = ctrl.metadata["block_counts"]
        print(f"[✓] {layout}: feasible, {sum(counts.values())} blocks, {ctrl.metadata['num_scalars']} scalars")
        print(f"    ↳ " + ", ".join(f"{f}={c}" for f, c in counts.items()))
        zeta2 = ctrl.zeta2()
        if zeta2 is not None:
            print(f"    ↳ zeta2 = {', '.join(f'{z:.6g}' for z in zeta2)} (sum {sum(zeta2):.6g})")
        save_controller(ctrl, out_dir / CONTROLLER_FILE)
        return ctrl, attempts, EXIT_OK
    code = EXIT_INFEASIBLE if EXIT_INFEASIBLE in codes else (max(codes) if codes else EXIT_SOLVER)
    return None, attempts, code


def _synth_log(system: SystemSpec, attempts: Dict[str, dict]) -> dict:
    return {
        "system": system.name,
        "subsystems": system.n,
        "n_bar": system.n_bar if system.n >= 2 else None,
        "attempts": attempts,
    }


def cmd_synth(cfg: RunConfig) -> int:
    system = _load(cfg)
    out_dir = _prepare_out(cfg)
    dbg = DebugLogger(cfg.debug)
    ctrl, attempts, code = _synth_layouts(system, cfg, dbg, out_dir)
    _write_json(out_dir / SYNTH_LOG_FILE, _synth_log(system, attempts))
    if ctrl is not None:
        print(f"    ↳ wrote {out_dir / CONTROLLER_FILE}")
    else:
        print(f"[x] no layout produced a certified controller", file=sys.stderr)
    dbg.print_summary()
    return code


def _sim_config(system: SystemSpec, cfg: RunConfig) -> SimConfig:
    noise = white_noise(system, cfg.sigma, cfg.seed) if cfg.sigma > 0 else None
    return SimConfig(t_end=cfg.tend, dt=cfg.dt, noise=noise, stride=cfg.stride)


def _run_simulation(system: SystemSpec, ctrl: Optional[ControllerSet], cfg: RunConfig,
                    out_dir: Path, dbg: DebugLogger) -> int:
    try:
        traj = simulate(system, ctrl, _sim_config(system, cfg), dbg)
    except SimulationDivergenceError as e:
        if e.trajectory is not None:
            write_trajectory_csv(e.trajectory, out_dir / TRAJECTORY_CSV)
            _write_json(out_dir / SUMMARY_JSON, {**trajectory_summary(e.trajectory), "diverged": str(e)})
        print(f"[x] {e}", file=sys.stderr)
        return e.exit_code
    zeta2 = ctrl.zeta2() if ctrl is not None else None
    metrics = hinf_metrics(traj, zeta2, dbg)
    write_trajectory_csv(traj, out_dir / TRAJECTORY_CSV)
    _write_json(out_dir / SUMMARY_JSON, trajectory_summary(traj, metrics))
    print(f"[✓] simulated {traj.t[-1]:g}s ({traj.samples} samples, {len(traj.switches)} switch(es))")
    for m in metrics:
        print(f"    ↳ subsystem {m.subsystem + 1}: |x(T)|={float((traj.x[m.subsystem][-1] ** 2).sum()) ** 0.5:.3e}"
              f" ratio={m.ratio_state:.3e}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    system = _load(cfg)
    out_dir = _prepare_out(cfg)
    dbg = DebugLogger(cfg.debug)
    ctrl = load_controller(cfg.controller) if cfg.controller else None
    if ctrl is None:
        print("[skip] no controller given; simulating the open loop")
    code = _run_simulation(system, ctrl, cfg, out_dir, dbg)
    dbg.print_summary()
    return code


def cmd_verify(cfg: RunConfig) -> int:
    system = _load(cfg)
    if not cfg.controller:
        raise InvalidOptionError("--controller is required for verify")
    ctrl = load_controller(cfg.controller)
    out_dir = _prepare_out(cfg)
    dbg = DebugLogger(cfg.debug)
    report = certify(system, ctrl, cfg.verify_config(), dbg)
    (out_dir / REPORT_JSON).write_text(report_to_json(report), encoding="utf-8")
    print(format_report(report), end="")
    dbg.print_summary()
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_repro(cfg: RunConfig) -> int:
    if cfg.system is None:
        cfg.system = str(bundled_example())
    if not Path(cfg.system).exists():
        print(f"[x] example asset not found: {cfg.system}", file=sys.stderr)
        return EXIT_IO_PARSE
    if cfg.zeta is None:
        cfg.zeta = ",".join(str(z) for z in REPRO_ZETA2)
    if cfg.layout is None:
        cfg.layout = REPRO_LAYOUT
    out_dir = _prepare_out(cfg)
    dbg = DebugLogger(cfg.debug)

    code = cmd_validate(cfg.system)
    if code != EXIT_OK:
        return code
    system = load_system(cfg.system)
    ctrl, attempts, code = _synth_layouts(system, cfg, dbg, out_dir)
    _write_json(out_dir / SYNTH_LOG_FILE, _synth_log(system, attempts))
    if ctrl is None:
        print("[x] no layout produced a certified controller", file=sys.stderr)
        return code

    code = _run_simulation(system, ctrl, cfg, out_dir, dbg)
    if code != EXIT_OK:
        return code
    report = certify(system, ctrl, cfg.verify_config(), dbg)
    (out_dir / REPORT_JSON).write_text(report_to_json(report), encoding="utf-8")
    print(format_report(report), end="")
    dbg.print_summary()
    return EXIT_OK if report.ok else EXIT_VALIDATION


# ---------- Entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switched_ts_lmi",
                                 description="Decentralized switched non-PDC output-feedback synthesis and verification")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        # defaults are None so config-file values survive unless a flag is given
        p.add_argument("--system", help="System file (JSON)")
        p.add_argument("--config", help="Run config file (JSON); flags override its keys")
        p.add_argument("--out", help=f"Output directory (default: {DEFAULT_OUT_DIR})")
        p.add_argument("--controller", help="Controller file written by synth")
        p.add_argument("--layout", choices=list(LAYOUTS) + ["both"], help="Gamma layout (default: coherent)")
        p.add_argument("--zeta", help="Comma-separated zeta^2 per subsystem, or 'minimize'")
        p.add_argument("--mu", type=float, help="Jump bound for every mode transition (default: 1)")
        p.add_argument("--lambda", dest="lambda_", type=float, help="Broadcast membership-derivative lower bound")
        p.add_argument("--eps", type=float, help="Strictness margin (default: 1e-6)")
        p.add_argument("--feas-tol", dest="feas_tol", type=float, help="Certification tolerance (default: 1e-7)")
        p.add_argument("--solver", help="cvxpy solver name (default: CLARABEL, else SCS)")
        p.add_argument("--dt", type=float, help="Integration step (default: 1e-3)")
        p.add_argument("--tend", type=float, help="Horizon in seconds (default: 30)")
        p.add_argument("--sigma", type=float, help="White-noise std per step (default: 0.01)")
        p.add_argument("--seed", type=int, help="Base noise seed")
        p.add_argument("--runs", type=int, help="Seeded H-infinity runs (default: 20)")
        p.add_argument("--stride", type=int, help="Record every k-th step (default: 1)")
        p.add_argument("--jobs", type=int, help="Parallel H-infinity runs; -1 for CPU count (default: 1)")
        p.add_argument("--debug", action="store_true", help="Print solver/check diagnostics summary")

    p = sub.add_parser("validate", help="Validate a system file")
    p.add_argument("system_path", nargs="?", help="System file (or --system)")
    common(p)
    for name, hlp in (("synth", "Synthesize controllers"), ("simulate", "Simulate a trajectory"),
                      ("verify", "Certify a stored controller"), ("repro", "Reproduce the bundled example")):
        common(sub.add_parser(name, help=hlp))
    return ap


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config and not Path(args.config).exists():
            raise FileNotFoundError(f"config file not found: {args.config}")
        cfg = RunConfig.from_file(Path(args.config)) if args.config else RunConfig()
        cfg.overlay(args)
        if args.command == "validate":
            path = getattr(args, "system_path", None) or cfg.system
            if not path:
                raise InvalidOptionError("a system file is required")
            return cmd_validate(path)
        return {"synth": cmd_synth, "simulate": cmd_simulate,
                "verify": cmd_verify, "repro": cmd_repro}[args.command](cfg)
    except SynthesisToolError as e:
        print(f"[x] {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"[x] {e}", file=sys.stderr)
        return EXIT_IO_PARSE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
