"""
Unit tests for the cyclic Jacobi eigensolver, checked against an independent
Householder tridiagonalisation + Sturm-sequence bisection oracle and numpy.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from switched_ts_lmi.modules.errors import JacobiConvergenceError
from switched_ts_lmi.modules.jacobi import jacobi_eigh, min_eigenvalue


def _tridiagonalise(a):
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k]
        alpha = -np.copysign(np.linalg.norm(x), x[0] if x[0] != 0 else 1.0)
        v = x.copy()
        v[0] -= alpha
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        v /= norm
        h = np.eye(n)
        h[k + 1:, k + 1:] -= 2.0 * np.outer(v, v)
        a = h @ a @ h
    return np.diag(a).copy(), np.diag(a, 1).copy()


def _count_below(diag, off, x):
    """Sturm count: number of eigenvalues of the tridiagonal matrix below x."""
    count, q = 0, 1.0
    for i in range(len(diag)):
        b2 = off[i - 1] ** 2 if i > 0 else 0.0
        q = diag[i] - x - (b2 / q if i > 0 else 0.0)
        if q == 0.0:
            q = 1e-300
        if q < 0:
            count += 1
    return count


def sturm_eigenvalues(a, tol=1e-13):
    diag, off = _tridiagonalise(a)
    radius = np.max(np.abs(diag)) + 2 * (np.max(np.abs(off)) if off.size else 0.0) + 1.0
    out = []
    for k in range(len(diag)):
        lo, hi = -radius, radius
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if _count_below(diag, off, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


def _random_symmetric(rng, n):
    m = rng.standard_normal((n, n))
    return (m + m.T) / 2


class TestJacobiEigh:
    def test_diagonal_input_is_returned_sorted(self):
        w, v = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
        assert np.allclose(w, [-1.0, 2.0, 3.0])
        assert np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]])

    def test_two_by_two_closed_form(self):
        w, _ = jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(w, [1.0, 3.0], atol=1e-14)

    def test_zero_matrix(self):
        w, v = jacobi_eigh(np.zeros((4, 4)))
        assert np.all(w == 0.0)
        assert np.allclose(v, np.eye(4))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            jacobi_eigh(np.zeros((2, 3)))

    def test_input_not_modified(self):
        m = np.array([[1.0, 2.0], [2.0, -1.0]])
        jacobi_eigh(m)
        assert np.array_equal(m, [[1.0, 2.0], [2.0, -1.0]])

    @pytest.mark.parametrize("n", [1, 3, 6, 12, 26])
    def test_matches_sturm_oracle(self, n):
        rng = np.random.default_rng(n)
        m = _random_symmetric(rng, n)
        w, _ = jacobi_eigh(m)
        assert np.allclose(w, sturm_eigenvalues(m), atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_numpy_and_reconstructs(self, seed):
        rng = np.random.default_rng(100 + seed)
        m = _random_symmetric(rng, 9)
        w, v = jacobi_eigh(m)
        assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-12)
        assert np.allclose(v @ np.diag(w) @ v.T, m, atol=1e-12)
        assert np.allclose(v.T @ v, np.eye(9), atol=1e-12)

    def test_repeated_eigenvalues(self):
        q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((5, 5)))
        m = q @ np.diag([1.0, 1.0, 1.0, -2.0, -2.0]) @ q.T
        w, _ = jacobi_eigh(m)
        assert np.allclose(w, [-2.0, -2.0, 1.0, 1.0, 1.0], atol=1e-12)

    def test_tiny_off_diagonal_does_not_overflow(self):
        m = np.array([[1.0, 1e-200, 0.0], [1e-200, 2.0, 1.0], [0.0, 1.0, 3.0]])
        with np.errstate(over="raise", invalid="raise"):
            w, _ = jacobi_eigh(m)
        assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-12)

    def test_sweep_limit_reports_non_convergence(self):
        m = _random_symmetric(np.random.default_rng(5), 8)
        with pytest.raises(JacobiConvergenceError, match="did not converge"):
            jacobi_eigh(m, max_sweeps=1)
        w, _ = jacobi_eigh(m)
        assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-12)


class TestMinEigenvalue:
    def test_semidefinite_boundary(self):
        m = np.array([[1.0, -1.0], [-1.0, 1.0]])
        assert min_eigenvalue(m) == pytest.approx(0.0, abs=1e-15)

    def test_empty_matrix(self):
        assert min_eigenvalue(np.zeros((0, 0))) == np.inf
