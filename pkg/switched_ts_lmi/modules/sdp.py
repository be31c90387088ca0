"""
Conic encoding of an LmiProgram, the solver adapter and residual certification.

Every block becomes F(theta) = F0 + sum_k theta_k F_k >= 0 after the sense and
margin are folded in:
    psd block  M >= m I   ->  F = M - m I
    nsd block  M <= -m I  ->  F = -M - m I

Symmetric variables are packed without sqrt(2) scaling: one scalar drives both
mirrored entries.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .constants import (
    DEFAULT_FEAS_TOL, SENSE_PSD, STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_ILL_POSED,
    STATUS_NUMERICAL, PREFERRED_SOLVERS,
)
from .debug_logger import DebugLogger, SolveEvent
from .errors import SolverError
from .jacobi import min_eigenvalue
from .lmi import LmiBlock, LmiProgram, VarRef, evaluate_block


@dataclass(frozen=True, eq=False)
class ConicBlock:
    label: str
    family: str
    dim: int
    constant: np.ndarray
    # parallel arrays of triplets: scalar index -> (row, col, coefficient), both triangles
    var_idx: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    coefs: np.ndarray


@dataclass(frozen=True, eq=False)
class ConicProgram:
    num_scalars: int
    objective: np.ndarray
    blocks: List[ConicBlock]
    scalar_map: List[Tuple[VarRef, int, int]]
    index_of: Dict[Tuple[VarRef, int, int], int]
    shapes: Dict[VarRef, Tuple[int, int, bool]]


@dataclass
class SolveResult:
    status: str
    point: Optional[np.ndarray] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == STATUS_FEASIBLE


@dataclass
class BlockResidual:
    label: str
    family: str
    min_eig: float
    margin: float
    passed: bool


@dataclass
class ResidualReport:
    blocks: List[BlockResidual]
    tol: float

    @property
    def ok(self) -> bool:
        return all(b.passed for b in self.blocks)

    def worst_by_family(self) -> Dict[str, BlockResidual]:
        """Block with the least slack (min_eig - margin) in each family."""
        worst: Dict[str, BlockResidual] = {}
        for b in self.blocks:
            cur = worst.get(b.family)
            if cur is None or b.min_eig - b.margin < cur.min_eig - cur.margin:
                worst[b.family] = b
        return worst

    def failures(self) -> List[BlockResidual]:
        return [b for b in self.blocks if not b.passed]


# ---------- Encoding

def _scalar_layout(program: LmiProgram):
    scalar_map: List[Tuple[VarRef, int, int]] = []
    for ref, shape in program.vars.shapes.items():
        if shape.symmetric:
            for r in range(shape.rows):
                for c in range(r, shape.cols):
                    scalar_map.append((ref, r, c))
        else:
            for r in range(shape.rows):
                for c in range(shape.cols):
                    scalar_map.append((ref, r, c))
    index_of = {key: k for k, key in enumerate(scalar_map)}
    return scalar_map, index_of


def _term_contributions(term, shape, index_of, coeff_sign: float):
    """Yield (scalar index, dense d x d contribution) of one term."""
    ref = term.var
    L, R = term.left, term.right
    if shape.is_scalar:
        p = L @ R
        yield index_of[(ref, 0, 0)], coeff_sign * term.coeff * (p + p.T)
        return
    for r in range(shape.rows):
        cols = range(r, shape.cols) if shape.symmetric else range(shape.cols)
        for c in cols:
            p = np.outer(L[:, r], R[c, :])
            if shape.symmetric and r != c:
                p = p + np.outer(L[:, c], R[r, :])
            if not p.any():
                continue
            yield index_of[(ref, r, c)], coeff_sign * term.coeff * (p + p.T)


def _encode_block(block: LmiBlock, program: LmiProgram, index_of) -> ConicBlock:
    sign = 1.0 if block.sense == SENSE_PSD else -1.0
    dense: Dict[int, np.ndarray] = {}
    for term in block.terms:
        shape = program.vars.shapes[term.var]
        for k, contrib in _term_contributions(term, shape, index_of, sign):
            if k in dense:
                dense[k] = dense[k] + contrib
            else:
                dense[k] = contrib
    var_idx, rows, cols, coefs = [], [], [], []
    for k in sorted(dense):
        rr, cc = np.nonzero(dense[k])
        var_idx.append(np.full(rr.size, k))
        rows.append(rr)
        cols.append(cc)
        coefs.append(dense[k][rr, cc])
    const = sign * block.constant - block.margin * np.eye(block.dim)

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    return ConicBlock(
        label=block.label, family=block.family, dim=block.dim, constant=const,
        var_idx=cat(var_idx, int), rows=cat(rows, int), cols=cat(cols, int), coefs=cat(coefs, float),
    )


def encode(program: LmiProgram) -> ConicProgram:
    scalar_map, index_of = _scalar_layout(program)
    objective = np.zeros(len(scalar_map))
    for ref in program.objective:
        objective[index_of[(ref, 0, 0)]] = 1.0
    return ConicProgram(
        num_scalars=len(scalar_map),
        objective=objective,
        blocks=[_encode_block(b, program, index_of) for b in program.blocks],
        scalar_map=scalar_map,
        index_of=index_of,
        shapes={r: (s.rows, s.cols, s.symmetric) for r, s in program.vars.shapes.items()},
    )


def pack(conic: ConicProgram, assignment: Dict[VarRef, np.ndarray]) -> np.ndarray:
    """Assignment -> scalar vector (upper triangle of symmetric variables)."""
    point = np.zeros(conic.num_scalars)
    for k, (ref, r, c) in enumerate(conic.scalar_map):
        point[k] = np.atleast_2d(assignment[ref])[r, c]
    return point


def decode(conic: ConicProgram, point: np.ndarray) -> Dict[VarRef, np.ndarray]:
    point = np.asarray(point, dtype=float)
    if point.shape != (conic.num_scalars,):
        raise ValueError(f"point has length {point.size}, expected {conic.num_scalars}")
    out = {ref: np.zeros((rows, cols)) for ref, (rows, cols, _) in conic.shapes.items()}
    for k, (ref, r, c) in enumerate(conic.scalar_map):
        out[ref][r, c] = point[k]
        if conic.shapes[ref][2]:
            out[ref][c, r] = point[k]
    return out


def evaluate_conic_block(block: ConicBlock, point: np.ndarray) -> np.ndarray:
    """F(theta) through the triplet map (sense and margin already folded in)."""
    m = block.constant.copy()
    np.add.at(m, (block.rows, block.cols), block.coefs * point[block.var_idx])
    return m


def export_sparse(conic: ConicProgram) -> str:
    """
    SDPA-style sparse listing: sum_k theta_k F_k - F_0 >= 0 with F_0 = -constant.
    Entries are upper triangle, 1-based; matrix 0 is F_0.
    """
    lines = [
        f"* switched_ts_lmi export: {conic.num_scalars} scalars, {len(conic.blocks)} blocks",
        str(conic.num_scalars),
        str(len(conic.blocks)),
        " ".join(str(b.dim) for b in conic.blocks),
        " ".join(f"{c:.17g}" for c in conic.objective) or "0",
    ]
    for nb, blk in enumerate(conic.blocks, start=1):
        for r in range(blk.dim):
            for c in range(r, blk.dim):
                if blk.constant[r, c] != 0.0:
                    lines.append(f"0 {nb} {r + 1} {c + 1} {-blk.constant[r, c]:.17g}")
        upper = blk.rows <= blk.cols
        for k, r, c, v in zip(blk.var_idx[upper], blk.rows[upper], blk.cols[upper], blk.coefs[upper]):
            lines.append(f"{k + 1} {nb} {r + 1} {c + 1} {v:.17g}")
    return "\n".join(lines) + "\n"


# ---------- Solver adapter

def _pick_solver(cp, requested: Optional[str]) -> str:
    installed = cp.installed_solvers()
    if requested:
        if requested.upper() not in installed:
            raise ValueError(f"solver {requested} is not installed (available: {', '.join(installed)})")
        return requested.upper()
    for name in PREFERRED_SOLVERS:
        if name in installed:
            return name
    raise SolverError("no SDP-capable solver installed (need CLARABEL or SCS)")


def _solver_kwargs(name: str) -> dict:
    if name == "SCS":
        return {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 200000}
    return {}


def certify_point(conic: ConicProgram, point: np.ndarray) -> Tuple[float, str]:
    """Worst Jacobi min-eigenvalue over all blocks and its label."""
    worst, where = np.inf, ""
    for blk in conic.blocks:
        e = min_eigenvalue(evaluate_conic_block(blk, point))
        if e < worst:
            worst, where = e, blk.label
    return worst, where


def solve(conic: ConicProgram, feas_tol: float = DEFAULT_FEAS_TOL,
          solver: Optional[str] = None, dbg: Optional[DebugLogger] = None) -> SolveResult:
    """
    Run the reference cvxpy backing. A Feasible result always carries a point
    certified by the Jacobi residual check; anything else is reported as a status.
    """
    import cvxpy as cp

    dbg = dbg or DebugLogger(False)
    t0 = time.perf_counter()
    theta = cp.Variable(conic.num_scalars)
    constraints = []
    for blk in conic.blocks:
        d = blk.dim
        amap = sp.csr_matrix(
            (blk.coefs, (blk.cols * d + blk.rows, blk.var_idx)), shape=(d * d, conic.num_scalars)
        )
        affine = cp.reshape(amap @ theta + blk.constant.flatten(order="F"), (d, d), order="F")
        slack = cp.Variable((d, d), PSD=True)
        constraints.append(slack == affine)
    objective = cp.Minimize(conic.objective @ theta) if conic.objective.any() else cp.Minimize(0)
    problem = cp.Problem(objective, constraints)

    name = _pick_solver(cp, solver)
    diag: Dict[str, object] = {"solver": name, "num_scalars": conic.num_scalars, "num_blocks": len(conic.blocks)}
    try:
        problem.solve(solver=name, **_solver_kwargs(name))
    except cp.error.SolverError as e:
        diag["message"] = str(e)
        diag["elapsed"] = time.perf_counter() - t0
        dbg.log(SolveEvent("solve", STATUS_NUMERICAL, str(e), diag["elapsed"]))
        return SolveResult(STATUS_NUMERICAL, diagnostics=diag)

    diag["raw_status"] = problem.status
    diag["elapsed"] = time.perf_counter() - t0
    stats = problem.solver_stats
    if stats is not None:
        diag["iterations"] = stats.num_iters
        diag["solve_time"] = stats.solve_time
    if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        status = STATUS_INFEASIBLE
    elif problem.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        status = STATUS_ILL_POSED
    elif problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and theta.value is not None:
        point = np.asarray(theta.value, dtype=float)
        worst, where = certify_point(conic, point)
        diag["worst_min_eig"] = worst
        diag["worst_block"] = where
        diag["objective"] = float(conic.objective @ point)
        if worst >= -feas_tol:
            dbg.log(SolveEvent("solve", STATUS_FEASIBLE, f"{name}, worst eig {worst:.2e} at {where}", diag["elapsed"]))
            return SolveResult(STATUS_FEASIBLE, point=point, diagnostics=diag)
        diag["message"] = f"solver point fails certification: min eig {worst:.3e} at {where}"
        status = STATUS_NUMERICAL
    else:
        status = STATUS_NUMERICAL
    dbg.log(SolveEvent("solve", status, f"{name}: {problem.status}", diag["elapsed"]))
    return SolveResult(status, diagnostics=diag)


# ---------- Certification

def residual_check(program: LmiProgram, assignment: Dict[VarRef, np.ndarray],
                   tol: float = DEFAULT_FEAS_TOL) -> ResidualReport:
    """
    Per-block sense-adjusted minimum eigenvalue (of M for psd blocks, of -M for
    nsd blocks) from the in-repo Jacobi routine; a block passes when that value
    is at least margin - tol.
    """
    out = []
    for blk in program.blocks:
        m = evaluate_block(blk, assignment)
        e = min_eigenvalue(m if blk.sense == SENSE_PSD else -m)
        out.append(BlockResidual(blk.label, blk.family, e, blk.margin, e >= blk.margin - tol))
    return ResidualReport(out, tol)
