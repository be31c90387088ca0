"""
Cyclic Jacobi eigensolver for small symmetric matrices.

Used to certify solver output independently of the solver and of LAPACK.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from .constants import JACOBI_MAX_SWEEPS, JACOBI_REL_TOL, JACOBI_SMALL_ANGLE, JACOBI_STALL_TOL
from .errors import JacobiConvergenceError


def _off_norm(a: np.ndarray) -> float:
    return math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))


def jacobi_eigh(matrix: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns). The input is
    symmetrised first; it is not modified.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    a = (a + a.T) / 2.0
    d = a.shape[0]
    v = np.eye(d)
    if d == 0:
        return np.zeros(0), v
    frob = math.sqrt(float(np.sum(a * a)))
    if frob == 0.0:
        return np.zeros(d), v
    for _ in range(max_sweeps):
        if _off_norm(a) <= JACOBI_REL_TOL * frob:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = float(a[q, q] - a[p, p])
                if abs(apq) < abs(diff) * JACOBI_SMALL_ANGLE:
                    # t ~ 1 / (2 theta) once theta*theta would overflow
                    t = float(apq) / diff
                else:
                    theta = diff / (2.0 * float(apq))
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if _off_norm(a) > JACOBI_STALL_TOL * frob:
            raise JacobiConvergenceError(
                f"Jacobi sweeps did not converge after {max_sweeps} sweep(s) "
                f"(off-diagonal norm {_off_norm(a):.3e})"
            )
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def min_eigenvalue(matrix: np.ndarray) -> float:
    w, _ = jacobi_eigh(matrix)
    return float(w[0]) if w.size else math.inf
