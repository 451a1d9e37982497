"""Static condensation of element velocities and pressure deviations.

The pressure basis is orthonormal with a constant first function, so the
element mean is coefficient 0 and the deviation is coefficients 1..np-1.
Element velocities and deviations couple only within their own element;
eliminating them leaves interior facet DOFs, one mean pressure per element
and the mean-zero multiplier.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .hdg import GlobalSystem, HdgSolution, solution_from_vector
from .solver import SolveReport, factorize, solve


class SingularLocalBlockError(RuntimeError):
    def __init__(self, element: int):
        super().__init__(f"local (u, p-deviation) block of element {element} is singular; tau may be too small")
        self.element = element


@dataclass
class CondensedSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    retained: np.ndarray  # global indices kept
    local: np.ndarray  # (NT, n_loc) global indices eliminated per element
    factors: list = field(repr=False)  # per-element LU factors of the local block
    coupling: sp.csr_matrix = field(repr=False)  # A[local, retained]
    local_rhs: np.ndarray = field(repr=False)  # (NT, n_loc)
    system: GlobalSystem = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def condense(sys: GlobalSystem) -> CondensedSystem:
    dm, spec = sys.dof_map, sys.spec
    nt = sys.mesh.n_triangles
    local = np.concatenate([dm.u_dofs, dm.p_dofs[:, 1:]], axis=1)
    n_loc = local.shape[1]
    is_local = np.zeros(dm.size, dtype=bool)
    is_local[local.ravel()] = True
    retained = np.flatnonzero(~is_local)

    A = sys.matrix.tocsr()
    flat = local.ravel()
    A_lr = A[flat][:, retained].tocsr()
    A_rl = A[retained][:, flat].tocsr()
    A_rr = A[retained][:, retained].tocsr()

    # local DOFs of different elements never couple, so A[flat, flat] is block diagonal
    sub = A[flat][:, flat].tocoo()
    blocks = np.zeros((nt, n_loc, n_loc))
    np.add.at(blocks, (sub.row // n_loc, sub.row % n_loc, sub.col % n_loc), sub.data)

    factors = []
    inv_blocks = np.empty_like(blocks)
    eye = np.eye(n_loc)
    for K in range(nt):
        lu, piv = scipy.linalg.lu_factor(blocks[K], check_finite=False)
        d = np.abs(np.diag(lu))
        if d.min() <= d.max() * n_loc * np.finfo(float).eps:
            raise SingularLocalBlockError(K)
        factors.append((lu, piv))
        inv_blocks[K] = scipy.linalg.lu_solve((lu, piv), eye)

    rows = np.repeat(np.arange(nt * n_loc).reshape(nt, n_loc), n_loc, axis=1).reshape(nt, n_loc, n_loc)
    cols = np.transpose(rows, (0, 2, 1))
    inv = sp.csr_matrix((inv_blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(nt * n_loc,) * 2)

    S = (A_rr - A_rl @ inv @ A_lr).tocsr()
    S.sort_indices()
    b_l = sys.rhs[flat]
    rhs = sys.rhs[retained] - A_rl @ (inv @ b_l)
    return CondensedSystem(S, rhs, retained, local, factors, A_lr, b_l.reshape(nt, n_loc), sys)


def solve_condensed(cs: CondensedSystem, ordering: str = "COLAMD") -> HdgSolution:
    x_r, report = solve(factorize(cs.matrix, ordering), cs.rhs)
    sys = cs.system
    x = np.zeros(sys.dof_map.size)
    x[cs.retained] = x_r
    nt, n_loc = cs.local.shape
    r = (cs.local_rhs.ravel() - cs.coupling @ x_r).reshape(nt, n_loc)
    for K, fac in enumerate(cs.factors):
        x[cs.local[K]] = scipy.linalg.lu_solve(fac, r[K], check_finite=False)
    full_res = np.linalg.norm(sys.matrix @ x - sys.rhs)
    bn = np.linalg.norm(sys.rhs)
    report = SolveReport(
        float(full_res / bn if bn > 0 else full_res), report.n_pivots, report.offdiagonal_pivots, report.elapsed
    )
    return solution_from_vector(sys, x, report)
