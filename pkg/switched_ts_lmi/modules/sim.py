"""
Closed-loop hybrid simulation of the interconnected switched T-S system.

Fixed-step RK4 over the stacked state of all subsystems. The active modes and
the disturbance samples are held across the four stages of a step; memberships,
outputs and control inputs are recomputed at every stage. Switching is checked
once per step, after the state update.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constants import DEFAULT_DT, DEFAULT_T_END, DIVERGENCE_BOUND
from .controller import ControllerSet, check_dimensions, control_output
from .debug_logger import DebugLogger
from .errors import IndefiniteMatrixError, SimConfigError, SimulationDivergenceError
from .model import (
    HysteresisFrontiers, SubsystemSpec, SwitchingRule, SystemSpec, TimeSchedule, membership_eval,
)


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int
    kind: str = "gaussian"


@dataclass(frozen=True, eq=False)
class SimConfig:
    t_end: float = DEFAULT_T_END
    dt: float = DEFAULT_DT
    noise: Optional[List[Optional[NoiseSpec]]] = None
    initial_states: Optional[List[np.ndarray]] = None
    stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise SimConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise SimConfigError(f"t_end ({self.t_end}) must be at least dt ({self.dt})")
        if self.stride < 1:
            raise SimConfigError("record stride must be >= 1")
        for spec in self.noise or []:
            if spec is not None and (spec.sigma < 0 or spec.kind != "gaussian"):
                raise SimConfigError(f"unsupported noise spec {spec}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


def white_noise(system: SystemSpec, sigma: float, seed: int) -> List[NoiseSpec]:
    """Per-subsystem Gaussian noise; subsystem i draws from seed + i."""
    return [NoiseSpec(sigma, seed + i) for i in range(system.n)]


def zero_states(system: SystemSpec) -> List[np.ndarray]:
    return [np.zeros(sub.state_dim) for sub in system.subsystems]


@dataclass(frozen=True)
class SwitchEvent:
    t: float
    subsystem: int
    from_mode: int
    to_mode: int
    v_minus: Optional[float] = None
    v_plus: Optional[float] = None

    @property
    def jump_ratio(self) -> Optional[float]:
        if self.v_minus is None or self.v_plus is None:
            return None
        if self.v_minus <= 0.0:
            return 0.0 if self.v_plus <= 0.0 else math.inf
        return self.v_plus / self.v_minus


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    x: List[np.ndarray]
    y: List[np.ndarray]
    u: List[np.ndarray]
    w: List[np.ndarray]
    modes: np.ndarray
    switches: List[SwitchEvent]
    V: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    dt: float = DEFAULT_DT
    stride: int = 1

    @property
    def samples(self) -> int:
        return self.t.size


# ---------- Switching

def switching_eval(rule: SwitchingRule, mode: int, x: Sequence[float], t: float,
                   entry: Optional[float] = None) -> int:
    """
    Next mode under `rule`. Schedules return the mode of the latest entry with
    switch_time <= t. Frontiers advance cyclically by one mode when H_mode(x)
    has changed sign relative to `entry` (its value at mode entry); reaching
    zero from a non-zero entry value counts as a crossing.
    """
    if isinstance(rule, TimeSchedule):
        current = mode
        for when, m in rule.entries:
            if when <= t + 1e-12 * max(1.0, abs(t)):
                current = m
            else:
                break
        return current
    if entry is None:
        return mode
    value = rule.value(mode, x)
    if entry * value < 0.0 or (value == 0.0 and entry != 0.0):
        return (mode + 1) % len(rule.c)
    return mode


def initial_mode(rule: SwitchingRule) -> int:
    return rule.initial_mode


# ---------- Dynamics

class _ModeStack:
    """Per (subsystem, mode) rule matrices stacked along axis 0 for blending."""

    def __init__(self, system: SystemSpec, i: int, j: int):
        rules = system.subsystems[i].modes[j].rules
        self.A = np.stack([r.A for r in rules])
        self.B = np.stack([r.B for r in rules])
        self.Bw = np.stack([r.Bw for r in rules])
        self.C = np.stack([r.C for r in rules])
        self.F = {a: np.stack([r.F[a] for r in rules]) for a in system.peers(i)}
        self.Bwp = {a: np.stack([r.Bw_peer[a] for r in rules]) for a in system.peers(i)}


def _blend(h: np.ndarray, stack: np.ndarray) -> np.ndarray:
    return np.tensordot(h, stack, axes=1)


def lyapunov_value(system: SystemSpec, ctrl: ControllerSet, i: int, mode: int, x: np.ndarray) -> float:
    """v = x^T (sum_s h_s X1[i,mode,s])^-1 x."""
    h = membership_eval(system.subsystems[i], mode, x)
    x1 = np.tensordot(h, np.stack(ctrl.stack(ctrl.X1, i, mode)), axes=1)
    try:
        factor = cho_factor(x1)
    except LinAlgError:
        raise IndefiniteMatrixError(f"blended X1 of subsystem {i + 1}, mode {mode + 1} is indefinite")
    return float(x @ cho_solve(factor, x))


class _Plant:
    def __init__(self, system: SystemSpec, ctrl: Optional[ControllerSet], dbg: Optional[DebugLogger]):
        self.system = system
        self.ctrl = ctrl
        self.dbg = dbg
        self.stacks = {(i, j): _ModeStack(system, i, j)
                       for i, sub in enumerate(system.subsystems) for j in range(sub.mode_count)}

    def signals(self, i: int, mode: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        sub = self.system.subsystems[i]
        h = membership_eval(sub, mode, x)
        y = _blend(h, self.stacks[(i, mode)].C) @ x
        if self.ctrl is None:
            u = np.zeros(sub.input_dim)
        else:
            u = control_output(self.ctrl, i, mode, h, y, self.dbg)
        return h, y, u

    def derivative(self, xs: List[np.ndarray], modes: List[int], ws: List[np.ndarray]) -> List[np.ndarray]:
        out = []
        for i, x in enumerate(xs):
            st = self.stacks[(i, modes[i])]
            h, _, u = self.signals(i, modes[i], x)
            dx = _blend(h, st.A) @ x + _blend(h, st.B) @ u + _blend(h, st.Bw) @ ws[i]
            for a in st.F:
                dx = dx + _blend(h, st.F[a]) @ xs[a] + _blend(h, st.Bwp[a]) @ ws[a]
            out.append(dx)
        return out

    def rk4(self, xs: List[np.ndarray], modes: List[int], ws: List[np.ndarray], dt: float) -> List[np.ndarray]:
        k1 = self.derivative(xs, modes, ws)
        k2 = self.derivative([x + 0.5 * dt * k for x, k in zip(xs, k1)], modes, ws)
        k3 = self.derivative([x + 0.5 * dt * k for x, k in zip(xs, k2)], modes, ws)
        k4 = self.derivative([x + dt * k for x, k in zip(xs, k3)], modes, ws)
        return [x + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                for x, a, b, c, d in zip(xs, k1, k2, k3, k4)]


def _noise(system: SystemSpec, cfg: SimConfig) -> List[np.ndarray]:
    steps = cfg.steps
    out = []
    for i, sub in enumerate(system.subsystems):
        spec = cfg.noise[i] if cfg.noise is not None and i < len(cfg.noise) else None
        if spec is None or spec.sigma == 0.0:
            out.append(np.zeros((steps, sub.disturbance_dim)))
        else:
            rng = np.random.default_rng(spec.seed)
            out.append(rng.normal(0.0, spec.sigma, size=(steps, sub.disturbance_dim)))
    return out


class _Recorder:
    def __init__(self, n: int, with_lyapunov: bool):
        self.t: List[float] = []
        self.x = [[] for _ in range(n)]
        self.y = [[] for _ in range(n)]
        self.u = [[] for _ in range(n)]
        self.w = [[] for _ in range(n)]
        self.modes: List[List[int]] = []
        self.v: Optional[List[List[float]]] = [] if with_lyapunov else None

    def build(self, switches: List[SwitchEvent], cfg: SimConfig) -> Trajectory:
        v = None if self.v is None else np.array(self.v, dtype=float).reshape(len(self.t), -1)
        return Trajectory(
            t=np.array(self.t),
            x=[np.array(s) for s in self.x],
            y=[np.array(s) for s in self.y],
            u=[np.array(s) for s in self.u],
            w=[np.array(s) for s in self.w],
            modes=np.array(self.modes, dtype=int).reshape(len(self.t), -1),
            switches=list(switches),
            V=None if v is None else v.sum(axis=1),
            v=v,
            dt=cfg.dt,
            stride=cfg.stride,
        )


def simulate(system: SystemSpec, ctrl: Optional[ControllerSet], cfg: SimConfig,
             dbg: Optional[DebugLogger] = None) -> Trajectory:
    """
    Integrate the interconnected plant in closed loop (or open loop when ctrl is None).

    Raises SimulationDivergenceError (partial trajectory attached) once any
    subsystem state leaves the 1e9 ball or becomes non-finite.
    """
    if ctrl is not None:
        check_dimensions(system, ctrl)
    n = system.n
    plant = _Plant(system, ctrl, dbg)
    steps, dt = cfg.steps, cfg.dt
    ws = _noise(system, cfg)
    init = cfg.initial_states if cfg.initial_states is not None else [s.initial_state for s in system.subsystems]
    if len(init) != n or any(np.shape(x0) != (sub.state_dim,) for x0, sub in zip(init, system.subsystems)):
        raise SimConfigError("initial states do not match the subsystem state dimensions")
    xs = [np.array(x0, dtype=float) for x0 in init]
    modes = [initial_mode(sub.switching) for sub in system.subsystems]
    modes = [switching_eval(sub.switching, modes[i], xs[i], 0.0) for i, sub in enumerate(system.subsystems)]
    entries = [_entry(sub.switching, modes[i], xs[i]) for i, sub in enumerate(system.subsystems)]
    rec = _Recorder(n, ctrl is not None)
    switches: List[SwitchEvent] = []

    for k in range(steps + 1):
        t = k * dt
        if k % cfg.stride == 0:
            rec.t.append(t)
            rec.modes.append(list(modes))
            vs = []
            for i in range(n):
                _, y, u = plant.signals(i, modes[i], xs[i])
                rec.x[i].append(xs[i].copy())
                rec.y[i].append(y)
                rec.u[i].append(u)
                rec.w[i].append(ws[i][min(k, steps - 1)].copy())
                if ctrl is not None:
                    vs.append(lyapunov_value(system, ctrl, i, modes[i], xs[i]))
            if rec.v is not None:
                rec.v.append(vs)
        if k == steps:
            break
        xs = plant.rk4(xs, modes, [w[k] for w in ws], dt)
        worst = max(float(np.linalg.norm(x)) if np.all(np.isfinite(x)) else math.inf for x in xs)
        if worst > DIVERGENCE_BOUND:
            raise SimulationDivergenceError(
                f"state norm {worst:.3e} exceeds {DIVERGENCE_BOUND:g} at t={t + dt:.6g}",
                trajectory=rec.build(switches, cfg),
            )
        t_next = (k + 1) * dt
        for i, sub in enumerate(system.subsystems):
            rule = sub.switching
            if isinstance(rule, HysteresisFrontiers) and entries[i] == 0.0:
                entries[i] = rule.value(modes[i], xs[i])
                continue
            new = switching_eval(rule, modes[i], xs[i], t_next, entries[i])
            if new == modes[i]:
                continue
            v_minus = v_plus = None
            if ctrl is not None:
                v_minus = lyapunov_value(system, ctrl, i, modes[i], xs[i])
                v_plus = lyapunov_value(system, ctrl, i, new, xs[i])
            switches.append(SwitchEvent(t_next, i, modes[i], new, v_minus, v_plus))
            modes[i] = new
            entries[i] = _entry(rule, new, xs[i])
    return rec.build(switches, cfg)


def _entry(rule: SwitchingRule, mode: int, x: np.ndarray) -> Optional[float]:
    return rule.value(mode, x) if isinstance(rule, HysteresisFrontiers) else None


# ---------- Post-processing

def lyapunov_samples(system: SystemSpec, traj: Trajectory, ctrl: ControllerSet) -> Tuple[np.ndarray, np.ndarray]:
    """(V, v) over the recorded grid for the recorded active modes."""
    v = np.zeros((traj.samples, system.n))
    for k in range(traj.samples):
        for i in range(system.n):
            v[k, i] = lyapunov_value(system, ctrl, i, int(traj.modes[k, i]), traj.x[i][k])
    return v.sum(axis=1), v


@dataclass
class HinfMetrics:
    subsystem: int
    state_energy: float
    output_energy: float
    disturbance_energy: float
    ratio_state: float
    ratio_output: float
    zero_disturbance: bool = False
    nonzero_initial_state: bool = False
    bound: Optional[float] = None

    @property
    def within_bound(self) -> Optional[bool]:
        return None if self.bound is None else self.ratio_state <= self.bound

    def to_dict(self) -> dict:
        return {**vars(self), "within_bound": self.within_bound}


def hinf_metrics(traj: Trajectory, zeta2: Optional[Sequence[float]] = None,
                 dbg: Optional[DebugLogger] = None) -> List[HinfMetrics]:
    """
    Finite-horizon attenuation ratios per subsystem: int x_i^T x_i over
    int (w_i^T w_i + sum_alpha w_alpha^T w_alpha), and the same with y_i^T y_i
    in the numerator. Zero disturbance energy gives ratio 0 with a flag.
    """
    n = len(traj.x)
    w_energy = [trapezoid(np.sum(w * w, axis=1), traj.t) for w in traj.w]
    out = []
    for i in range(n):
        num_x = float(trapezoid(np.sum(traj.x[i] ** 2, axis=1), traj.t))
        num_y = float(trapezoid(np.sum(traj.y[i] ** 2, axis=1), traj.t))
        den = float(sum(w_energy))
        nonzero_init = bool(np.any(traj.x[i][0] != 0.0))
        if nonzero_init and dbg is not None:
            dbg.warn(f"subsystem {i + 1}: H-infinity ratio computed from a non-zero initial state")
        zero = den == 0.0
        out.append(HinfMetrics(
            subsystem=i,
            state_energy=num_x,
            output_energy=num_y,
            disturbance_energy=den,
            ratio_state=0.0 if zero else num_x / den,
            ratio_output=0.0 if zero else num_y / den,
            zero_disturbance=zero,
            nonzero_initial_state=nonzero_init,
            bound=None if zeta2 is None else float(zeta2[i]),
        ))
    return out


def csv_header(traj: Trajectory) -> List[str]:
    n = len(traj.x)
    cols = ["t"] + [f"mode_{i + 1}" for i in range(n)]
    for label, series in (("x", traj.x), ("y", traj.y), ("u", traj.u), ("w", traj.w)):
        for i in range(n):
            cols += [f"{label}{i + 1}_{c + 1}" for c in range(series[i].shape[1])]
    return cols + ["V"]


def write_trajectory_csv(traj: Trajectory, path: Union[str, Path]) -> None:
    """One row per recorded sample: t, modes (1-based), x, y, u, w per subsystem, V."""
    n = len(traj.x)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(traj))
        for k in range(traj.samples):
            row = [repr(float(traj.t[k]))] + [str(int(m) + 1) for m in traj.modes[k]]
            for series in (traj.x, traj.y, traj.u, traj.w):
                for i in range(n):
                    row += [repr(float(v)) for v in series[i][k]]
            row.append("" if traj.V is None else repr(float(traj.V[k])))
            writer.writerow(row)


def trajectory_summary(traj: Trajectory, hinf: Optional[List[HinfMetrics]] = None) -> Dict[str, object]:
    n = len(traj.x)
    return {
        "samples": traj.samples,
        "t_end": float(traj.t[-1]) if traj.samples else 0.0,
        "dt": traj.dt,
        "stride": traj.stride,
        "switches": [
            {"t": e.t, "subsystem": e.subsystem + 1, "from": e.from_mode + 1, "to": e.to_mode + 1,
             "v_minus": e.v_minus, "v_plus": e.v_plus}
            for e in traj.switches
        ],
        "final_norm": [float(np.linalg.norm(traj.x[i][-1])) for i in range(n)],
        "max_norm": [float(np.max(np.linalg.norm(traj.x[i], axis=1))) for i in range(n)],
        "hinf": None if hinf is None else [m.to_dict() for m in hinf],
    }
