"""
LMI families for decentralized switched non-PDC output-feedback synthesis.

Every condition is carried as an LmiBlock: a symmetric constant plus a list of
terms coeff*(L V R + (L V R)^T) in one decision variable V each. Builders are
pure functions of (system, options).

Families:
    G1      X1, X5, X9 >= eps I
    G2      X1[l] + W[s,k] >= eps I
    G3      mode-jump condition [[-mu X1, X1], [X1, -X1+]] <= 0
    G4stab  core Gamma plus tau Schur columns, one per peer
    G4rob   N-bar scaled core with tau, Q and disturbance Schur rows, per peer
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    DEFAULT_EPS, DEFAULT_FEAS_TOL, DEFAULT_MU, LAYOUT_COHERENT, LAYOUT_PAPER, LAYOUTS,
    FAMILY_POSITIVITY, FAMILY_SLACK, FAMILY_JUMP, FAMILY_STABILITY, FAMILY_ROBUSTNESS,
    FAMILIES, SENSE_PSD, SENSE_NSD,
)
from .errors import InvalidOptionError, LayoutInfeasibleError, SynthesisToolError
from .model import SystemSpec, SubsystemSpec


# ---------- Decision variables

class VarRef(NamedTuple):
    family: str
    index: Tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.family}[{','.join(str(k + 1) for k in self.index)}]"


class VarShape(NamedTuple):
    rows: int
    cols: int
    symmetric: bool

    @property
    def is_scalar(self) -> bool:
        return self.rows == 1 and self.cols == 1

    @property
    def scalar_count(self) -> int:
        if self.symmetric:
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols


@dataclass(frozen=True)
class DecisionVars:
    """Ordered variable catalogue; the order fixes the scalar layout of the conic program."""
    shapes: Dict[VarRef, VarShape]

    def __contains__(self, ref: VarRef) -> bool:
        return ref in self.shapes

    def __iter__(self) -> Iterator[VarRef]:
        return iter(self.shapes)

    def __len__(self) -> int:
        return len(self.shapes)

    @property
    def scalar_count(self) -> int:
        return sum(s.scalar_count for s in self.shapes.values())

    def by_family(self, family: str) -> List[VarRef]:
        return [r for r in self.shapes if r.family == family]


def build_catalogue(system: SystemSpec, minimize_zeta: bool = False) -> DecisionVars:
    shapes: Dict[VarRef, VarShape] = {}
    for i, sub in enumerate(system.subsystems):
        n, p, u = sub.state_dim, sub.output_dim, sub.input_dim
        for j, mode in enumerate(sub.modes):
            for k in range(mode.rule_count):
                shapes[VarRef("X1", (i, j, k))] = VarShape(n, n, True)
                shapes[VarRef("X5", (i, j, k))] = VarShape(p, p, True)
                shapes[VarRef("X9", (i, j, k))] = VarShape(u, u, True)
                shapes[VarRef("K", (i, j, k))] = VarShape(u, p, False)
            for s in range(mode.rule_count):
                for k in range(mode.rule_count):
                    shapes[VarRef("W", (i, j, s, k))] = VarShape(n, n, True)
    for i, a in system.pairs():
        shapes[VarRef("tau", (i, a))] = VarShape(1, 1, True)
    if minimize_zeta and system.n >= 2:
        for i in range(system.n):
            shapes[VarRef("zeta2", (i,))] = VarShape(1, 1, True)
    return DecisionVars(shapes)


def zero_assignment(vars: DecisionVars) -> Dict[VarRef, np.ndarray]:
    return {r: np.zeros((s.rows, s.cols)) for r, s in vars.shapes.items()}


def random_assignment(vars: DecisionVars, rng: np.random.Generator) -> Dict[VarRef, np.ndarray]:
    out = {}
    for r, s in vars.shapes.items():
        m = rng.standard_normal((s.rows, s.cols))
        out[r] = (m + m.T) / 2 if s.symmetric else m
    return out


# ---------- Blocks

@dataclass(frozen=True, eq=False)
class LmiTerm:
    var: VarRef
    left: np.ndarray
    right: np.ndarray
    coeff: float = 1.0


@dataclass(frozen=True, eq=False)
class AffineExpr:
    """Symmetric affine expression sum_t coeff_t * V_t (all V_t same square size)."""
    dim: int
    parts: List[Tuple[float, VarRef]] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class LmiBlock:
    family: str
    index: Tuple[int, ...]
    dim: int
    constant: np.ndarray
    terms: List[LmiTerm]
    sense: str
    margin: float

    @property
    def label(self) -> str:
        return f"{self.family}({','.join(str(k + 1) for k in self.index)})"


@dataclass(frozen=True, eq=False)
class LmiProgram:
    blocks: List[LmiBlock]
    vars: DecisionVars
    objective: List[VarRef]
    eps: float
    options: "SynthesisOptions"


class _BlockBuilder:
    """Accumulates terms on a block partitioned into named slots."""

    def __init__(self, slots: Sequence[Tuple[str, int]]):
        self.offsets: Dict[str, Tuple[int, int]] = {}
        pos = 0
        for name, size in slots:
            self.offsets[name] = (pos, size)
            pos += size
        self.dim = pos
        self.constant = np.zeros((pos, pos))
        self.terms: List[LmiTerm] = []

    def rows(self, slot: str, inner: Optional[np.ndarray] = None) -> np.ndarray:
        start, size = self.offsets[slot]
        inner = np.eye(size) if inner is None else np.atleast_2d(inner)
        out = np.zeros((self.dim, inner.shape[1]))
        out[start:start + size, :] = inner
        return out

    def cols(self, slot: str, inner: Optional[np.ndarray] = None) -> np.ndarray:
        start, size = self.offsets[slot]
        inner = np.eye(size) if inner is None else np.atleast_2d(inner)
        out = np.zeros((inner.shape[0], self.dim))
        out[:, start:start + size] = inner
        return out

    def var(self, row: str, col: str, ref: VarRef, left=None, right=None, coeff: float = 1.0):
        """Place left*V*right at (row, col); mirrored automatically. Diagonal placement of
        c*V with symmetric V uses coeff c/2."""
        self.terms.append(LmiTerm(ref, self.rows(row, left), self.cols(col, right), coeff))

    def diag_var(self, slot: str, ref: VarRef, coeff: float, inner=None):
        """coeff*V on the diagonal slot (coeff*v*inner for a scalar V)."""
        self.var(slot, slot, ref, left=inner, coeff=coeff / 2.0)

    def const(self, row: str, col: str, mat: np.ndarray):
        r0, rs = self.offsets[row]
        c0, cs = self.offsets[col]
        mat = np.atleast_2d(mat)
        self.constant[r0:r0 + rs, c0:c0 + cs] += mat
        if row != col:
            self.constant[c0:c0 + cs, r0:r0 + rs] += mat.T

    def affine(self, slot: str, expr: AffineExpr, scale: float):
        for c, ref in expr.parts:
            self.diag_var(slot, ref, scale * c)

    def block(self, family: str, index: Tuple[int, ...], sense: str, margin: float) -> LmiBlock:
        return LmiBlock(family, index, self.dim, self.constant, self.terms, sense, margin)


# ---------- Options

@dataclass
class SynthesisOptions:
    layout: str = LAYOUT_COHERENT
    eps: float = DEFAULT_EPS
    mu: float = DEFAULT_MU
    mu_map: Dict[Tuple[int, int, int], float] = field(default_factory=dict)
    lambda_override: Optional[float] = None
    zeta2: Optional[List[float]] = None
    minimize_zeta: bool = False
    solver: Optional[str] = None
    feas_tol: float = DEFAULT_FEAS_TOL

    def mu_for(self, i: int, j: int, jp: int) -> float:
        return self.mu_map.get((i, j, jp), self.mu)

    def check(self, system: SystemSpec) -> None:
        if self.layout not in LAYOUTS:
            raise InvalidOptionError(f"unknown layout '{self.layout}' (expected one of {', '.join(LAYOUTS)})")
        if self.eps < 0:
            raise InvalidOptionError("eps must be non-negative")
        if self.feas_tol <= 0:
            raise InvalidOptionError("feas_tol must be positive")
        if system.n >= 2 and not self.minimize_zeta:
            if self.zeta2 is None:
                raise InvalidOptionError("zeta2 values are required (or request minimisation)")
            if len(self.zeta2) != system.n:
                raise InvalidOptionError(f"{len(self.zeta2)} zeta2 values for {system.n} subsystems")
            if any(z <= 0 for z in self.zeta2):
                raise InvalidOptionError("zeta2 values must be positive")

    def to_dict(self) -> dict:
        return {
            "layout": self.layout,
            "eps": self.eps,
            "mu": self.mu,
            "mu_map": {f"{i + 1},{j + 1},{jp + 1}": v for (i, j, jp), v in self.mu_map.items()},
            "lambda_override": self.lambda_override,
            "zeta2": None if self.zeta2 is None else list(self.zeta2),
            "minimize_zeta": self.minimize_zeta,
            "solver": self.solver,
            "feas_tol": self.feas_tol,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthesisOptions":
        data = dict(data)
        mu_map = {}
        for key, v in (data.pop("mu_map", None) or {}).items():
            i, j, jp = (int(t) - 1 for t in key.split(","))
            mu_map[(i, j, jp)] = float(v)
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(mu_map=mu_map, **known)


# ---------- Builders

def build_positivity_set(system: SystemSpec, options: SynthesisOptions) -> List[LmiBlock]:
    blocks = []
    for i, sub in enumerate(system.subsystems):
        for j, mode in enumerate(sub.modes):
            r = mode.rule_count
            for k in range(r):
                for fam, size in (("X1", sub.state_dim), ("X5", sub.output_dim), ("X9", sub.input_dim)):
                    b = _BlockBuilder([("v", size)])
                    b.diag_var("v", VarRef(fam, (i, j, k)), 1.0)
                    blocks.append(b.block(FAMILY_POSITIVITY, (i, j, k), SENSE_PSD, options.eps))
            for s in range(r):
                for k in range(r):
                    for l in range(r):
                        b = _BlockBuilder([("v", sub.state_dim)])
                        b.diag_var("v", VarRef("X1", (i, j, l)), 1.0)
                        b.diag_var("v", VarRef("W", (i, j, s, k)), 1.0)
                        blocks.append(b.block(FAMILY_SLACK, (i, j, s, k, l), SENSE_PSD, options.eps))
    return blocks


def build_jump_set(system: SystemSpec, options: SynthesisOptions) -> List[LmiBlock]:
    blocks = []
    for i, sub in enumerate(system.subsystems):
        for j, mode in enumerate(sub.modes):
            for jp, mode_p in enumerate(sub.modes):
                if jp == j:
                    continue
                mu = options.mu_for(i, j, jp)
                if mu <= 0:
                    raise InvalidOptionError(f"mu for subsystem {i + 1}, {j + 1}->{jp + 1} must be positive, got {mu}")
                for k in range(mode.rule_count):
                    for kp in range(mode_p.rule_count):
                        b = _BlockBuilder([("a", sub.state_dim), ("b", sub.state_dim)])
                        x = VarRef("X1", (i, j, k))
                        b.diag_var("a", x, -mu)
                        b.var("b", "a", x)
                        b.diag_var("b", VarRef("X1", (i, jp, kp)), -1.0)
                        blocks.append(b.block(FAMILY_JUMP, (i, j, jp, k, kp), SENSE_NSD, 0.0))
    return blocks


def _lambdas(system: SystemSpec, i: int, j: int, options: SynthesisOptions) -> np.ndarray:
    mode = system.subsystems[i].modes[j]
    if options.lambda_override is not None:
        return np.full(mode.rule_count, float(options.lambda_override))
    return np.asarray(mode.lambda_bounds, dtype=float)


def build_phi(i: int, j: int, s: int, k: int, vars: DecisionVars,
              lambdas: Sequence[float]) -> AffineExpr:
    """Phi[i,j,s,k] = sum_l' lambda_l' (X1[i,j,l'] + W[i,j,s,k])."""
    w = VarRef("W", (i, j, s, k))
    dim = vars.shapes[w].rows
    parts: List[Tuple[float, VarRef]] = []
    for lp, lam in enumerate(lambdas):
        if lam == 0:
            continue
        parts.append((float(lam), VarRef("X1", (i, j, lp))))
        parts.append((float(lam), w))
    return AffineExpr(dim, parts)


def _core(b: _BlockBuilder, system: SystemSpec, i: int, j: int, s: int, k: int, l: int,
          phi: AffineExpr, layout: str, scale: float):
    """scale * Gamma-hat core on slots x, y, u (without tau F F^T terms)."""
    rule = system.subsystems[i].modes[j].rules[s]
    x1, x5, x9 = (VarRef(f, (i, j, k)) for f in ("X1", "X5", "X9"))
    gain = VarRef("K", (i, j, l))
    b.var("x", "x", x1, left=rule.A, coeff=scale)
    b.affine("x", phi, -scale)
    b.diag_var("y", x5, -2.0 * scale)
    b.diag_var("u", x9, -2.0 * scale)
    b.var("u", "x", x9, right=rule.B.T, coeff=scale)
    if layout == LAYOUT_COHERENT:
        b.var("y", "x", x1, left=rule.C, coeff=scale)
        b.var("u", "y", gain, coeff=scale)
    else:
        b.var("u", "x", x1, left=rule.C, coeff=scale)
        b.var("y", "u", gain, coeff=scale)


def _check_layout(system: SystemSpec, layout: str):
    if layout == LAYOUT_PAPER:
        for i, sub in enumerate(system.subsystems):
            if sub.output_dim != sub.input_dim:
                raise LayoutInfeasibleError(
                    f"paper-literal layout needs p_i = u_i; subsystem {i + 1} has p={sub.output_dim}, u={sub.input_dim}"
                )


def _rule_tuples(sub: SubsystemSpec) -> Iterator[Tuple[int, int, int, int]]:
    for j, mode in enumerate(sub.modes):
        r = mode.rule_count
        for s in range(r):
            for k in range(r):
                for l in range(r):
                    yield j, s, k, l


def build_stability_set(system: SystemSpec, options: SynthesisOptions,
                        vars: Optional[DecisionVars] = None) -> List[LmiBlock]:
    _check_layout(system, options.layout)
    vars = vars or build_catalogue(system)
    blocks = []
    for i, sub in enumerate(system.subsystems):
        aug = sub.augmented_dim
        peers = system.peers(i)
        slots = [("x", sub.state_dim), ("y", sub.output_dim), ("u", sub.input_dim)]
        slots += [(f"a{a}", aug) for a in peers]
        for j, s, k, l in _rule_tuples(sub):
            b = _BlockBuilder(slots)
            phi = build_phi(i, j, s, k, vars, _lambdas(system, i, j, options))
            _core(b, system, i, j, s, k, l, phi, options.layout, 1.0)
            rule = sub.modes[j].rules[s]
            for a in peers:
                F = rule.F[a]
                b.diag_var("x", VarRef("tau", (i, a)), 1.0, inner=F @ F.T)
                _schur_xbar(b, f"a{a}", sub, i, j, k)
                b.diag_var(f"a{a}", VarRef("tau", (a, i)), -1.0)
            blocks.append(b.block(FAMILY_STABILITY, (i, j, s, k, l), SENSE_NSD, options.eps))
    return blocks


def _schur_xbar(b: _BlockBuilder, slot: str, sub: SubsystemSpec, i: int, j: int, k: int):
    """Off-diagonal X-bar = blockdiag(X1, X5, X9) between `slot` and the core."""
    start = b.offsets[slot][0]
    n, p, u = sub.state_dim, sub.output_dim, sub.input_dim
    for fam, off, size, core in (("X1", 0, n, "x"), ("X5", n, p, "y"), ("X9", n + p, u, "u")):
        left = np.zeros((b.dim, size))
        left[start + off:start + off + size, :] = np.eye(size)
        b.terms.append(LmiTerm(VarRef(fam, (i, j, k)), left, b.cols(core), 1.0))


def build_robustness_set(system: SystemSpec, options: SynthesisOptions,
                         vars: Optional[DecisionVars] = None) -> List[LmiBlock]:
    _check_layout(system, options.layout)
    if system.n < 2:
        return []
    vars = vars or build_catalogue(system, options.minimize_zeta)
    nbar = system.n_bar
    blocks = []
    for i, sub in enumerate(system.subsystems):
        n, p, vi = sub.state_dim, sub.output_dim, sub.disturbance_dim
        for a in system.peers(i):
            va = system.subsystems[a].disturbance_dim
            slots = [("x", n), ("y", p), ("u", sub.input_dim),
                     ("t", sub.augmented_dim), ("q", p), ("w", vi + va)]
            xi = np.diag(np.concatenate([np.full(vi, nbar), np.ones(va)]))
            for j, s, k, l in _rule_tuples(sub):
                b = _BlockBuilder(slots)
                phi = build_phi(i, j, s, k, vars, _lambdas(system, i, j, options))
                _core(b, system, i, j, s, k, l, phi, options.layout, nbar)
                rule = sub.modes[j].rules[s]
                F = rule.F[a]
                b.diag_var("x", VarRef("tau", (i, a)), 1.0, inner=F @ F.T)
                _schur_xbar(b, "t", sub, i, j, k)
                b.diag_var("t", VarRef("tau", (a, i)), -1.0)
                b.var("q", "y", VarRef("X5", (i, j, k)), coeff=math.sqrt(nbar))
                b.const("q", "q", -np.eye(p))
                b_tilde = np.hstack([nbar * rule.Bw, rule.Bw_peer[a]])
                b.const("w", "x", b_tilde.T)
                if options.minimize_zeta:
                    b.diag_var("w", VarRef("zeta2", (i,)), -1.0, inner=xi)
                else:
                    b.const("w", "w", -options.zeta2[i] * xi)
                blocks.append(b.block(FAMILY_ROBUSTNESS, (i, a, j, s, k, l), SENSE_NSD, options.eps))
    return blocks


def _check_block(block: LmiBlock, vars: DecisionVars):
    for t in block.terms:
        if t.var not in vars:
            raise SynthesisToolError(f"{block.label}: variable {t.var} missing from the catalogue")
        shape = vars.shapes[t.var]
        inner_l, inner_r = (shape.rows, shape.cols) if not shape.is_scalar else (t.left.shape[1], t.right.shape[0])
        if (t.left.shape != (block.dim, inner_l) or t.right.shape != (inner_r, block.dim)):
            raise SynthesisToolError(f"{block.label}: term in {t.var} is not conformable")


def assemble_program(system: SystemSpec, options: SynthesisOptions) -> LmiProgram:
    """All five families over a complete catalogue; minimises sum zeta2 when requested."""
    options.check(system)
    vars = build_catalogue(system, options.minimize_zeta)
    blocks = (build_positivity_set(system, options)
              + build_jump_set(system, options)
              + build_stability_set(system, options, vars)
              + build_robustness_set(system, options, vars))
    for blk in blocks:
        _check_block(blk, vars)
    objective = vars.by_family("zeta2") if options.minimize_zeta else []
    return LmiProgram(blocks=blocks, vars=vars, objective=objective, eps=options.eps, options=options)


# ---------- Evaluation and diagnostics

def _value(t: LmiTerm, assignment: Dict[VarRef, np.ndarray]) -> np.ndarray:
    v = np.asarray(assignment[t.var], dtype=float)
    if v.size == 1 and t.left.shape[1] == t.right.shape[0] and t.left.shape[1] != 1:
        return float(v.reshape(-1)[0]) * (t.left @ t.right)
    return t.left @ np.atleast_2d(v) @ t.right


def evaluate_block(block: LmiBlock, assignment: Dict[VarRef, np.ndarray]) -> np.ndarray:
    m = block.constant.copy()
    for t in block.terms:
        lvr = _value(t, assignment)
        m += t.coeff * (lvr + lvr.T)
    return m


def dump_block(block: LmiBlock) -> str:
    """Plain-text listing of a block for diffing against hand calculations."""
    rel = ">=" if block.sense == SENSE_PSD else "<="
    bound = block.margin if block.sense == SENSE_PSD else -block.margin
    lines = [f"{block.label}  dim={block.dim}  M {rel} {bound:g}*I", "constant:"]
    lines += ["  " + " ".join(f"{x: .6g}" for x in row) for row in block.constant]
    for n, t in enumerate(block.terms):
        lines.append(f"term {n}: {t.coeff:g} * Sym(L {t.var} R)")
        lines.append("  L:")
        lines += ["    " + " ".join(f"{x: .6g}" for x in row) for row in t.left]
        lines.append("  R:")
        lines += ["    " + " ".join(f"{x: .6g}" for x in row) for row in t.right]
    return "\n".join(lines) + "\n"


def family_counts(program: LmiProgram) -> Dict[str, int]:
    counts = {f: 0 for f in FAMILIES}
    for blk in program.blocks:
        counts[blk.family] += 1
    return counts


def augmented_closed_loop(A: np.ndarray, B: np.ndarray, C: np.ndarray,
                          K: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Descriptor closed-loop matrix [[A, 0, B], [C, -I, 0], [0, K M^-1, -I]]."""
    n, u = B.shape
    p = C.shape[0]
    out = np.zeros((n + p + u, n + p + u))
    out[:n, :n] = A
    out[:n, n + p:] = B
    out[n:n + p, :n] = C
    out[n:n + p, n:n + p] = -np.eye(p)
    out[n + p:, n:n + p] = K @ np.linalg.inv(M)
    out[n + p:, n + p:] = -np.eye(u)
    return out


def lemma_gap(A: np.ndarray, B: np.ndarray, tau: float) -> float:
    """Min eigenvalue of tau A^T A + B^T B / tau - A^T B - B^T A (never below 0 in exact arithmetic)."""
    m = tau * A.T @ A + (B.T @ B) / tau - A.T @ B - B.T @ A
    return float(np.linalg.eigvalsh((m + m.T) / 2)[0])
