"""Sparse storage and direct solves for symmetric indefinite systems.

Factorization is delegated to SuperLU (``scipy.sparse.linalg.splu``), which
uses threshold partial pivoting and so copes with the zero pressure block of
saddle-point matrices.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_DIAGNOSTIC_LIMIT = 4000


class SingularMatrixError(RuntimeError):
    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class SparseMatrix:
    """Coordinate-format accumulator with order-independent duplicate summation."""

    def __init__(self, shape: tuple[int, int]):
        self.shape = shape
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    def add(self, rows, cols, vals) -> None:
        rows, cols, vals = np.broadcast_arrays(
            np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)
        )
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix(self.shape)
        r = np.concatenate(self._rows)
        c = np.concatenate(self._cols)
        v = np.concatenate(self._vals)
        keep = v != 0.0
        r, c, v = r[keep], c[keep], v[keep]
        # sorting on the value as well makes the reduction independent of insertion order
        order = np.lexsort((v, c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size:
            new = np.ones(r.size, dtype=bool)
            new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            starts = np.flatnonzero(new)
            v = np.add.reduceat(v, starts)
            r, c = r[starts], c[starts]
        indptr = np.zeros(self.shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        indptr = np.cumsum(indptr)
        return sp.csr_matrix((v, c, indptr), shape=self.shape)


def symmetry_defect(A) -> float:
    """max|A - A^T| / max|A|."""
    A = sp.csr_matrix(A)
    scale = abs(A).max()
    if scale == 0:
        return 0.0
    return float(abs(A - A.T).max() / scale)


@dataclass(frozen=True)
class SolveReport:
    relative_residual: float
    n_pivots: int
    offdiagonal_pivots: int
    elapsed: float


class Factorization:
    def __init__(self, matrix, lu, elapsed: float):
        self.matrix = matrix
        self.lu = lu
        self.elapsed = elapsed
        self.n = matrix.shape[0]
        self.offdiagonal_pivots = int(np.count_nonzero(lu.perm_r != lu.perm_c))


def _dense_failing_pivot(A) -> int | None:
    if A.shape[0] > DENSE_DIAGNOSTIC_LIMIT:
        return None
    _, _, U = scipy.linalg.lu(A.toarray())
    d = np.abs(np.diag(U))
    tol = d.max(initial=0.0) * A.shape[0] * np.finfo(float).eps
    bad = np.flatnonzero(d <= tol)
    return int(bad[0]) if bad.size else None


def factorize(matrix, ordering: str = "COLAMD") -> Factorization:
    """LU factorization with partial pivoting.

    ``ordering="NATURAL"`` disables the fill-reducing column permutation.
    """
    A = sp.csc_matrix(matrix)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    t0 = time.perf_counter()
    try:
        lu = spla.splu(A, permc_spec=ordering)
    except RuntimeError as exc:
        pivot = _dense_failing_pivot(A)
        raise SingularMatrixError(f"factorization failed ({exc}); failing pivot {pivot}", pivot) from exc
    diag_u = np.abs(lu.U.diagonal())
    if diag_u.size and diag_u.min() <= diag_u.max() * A.shape[0] * np.finfo(float).eps:
        pivot = int(np.argmin(diag_u))
        raise SingularMatrixError(f"matrix is numerically singular at pivot {pivot}", pivot)
    return Factorization(A.tocsr(), lu, time.perf_counter() - t0)


def solve(handle: Factorization, rhs) -> tuple[np.ndarray, SolveReport]:
    b = np.asarray(rhs, dtype=float)
    if b.shape != (handle.n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({handle.n},)")
    t0 = time.perf_counter()
    x = handle.lu.solve(b)
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(handle.matrix @ x - b)
    rel = res / bnorm if bnorm > 0 else res
    report = SolveReport(float(rel), handle.n, handle.offdiagonal_pivots, handle.elapsed + time.perf_counter() - t0)
    return x, report


def solve_system(matrix, rhs, ordering: str = "COLAMD") -> tuple[np.ndarray, SolveReport]:
    return solve(factorize(matrix, ordering), rhs)
