"""Norms, discretization errors, convergence orders and an inf-sup estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .basis import EdgeBasis, edge_trace_projection, gauss_legendre_1d, reference_edge_points
from .hdg import (
    HdgSolution,
    SpaceSpec,
    build_dof_map,
    element_geometry,
    facet_signs,
    local_forms,
    reference_element,
    to_physical,
)
from .mesh import Mesh
from .solver import SparseMatrix

COLUMNS = ("l2_u", "h1_u", "h2_weighted", "jump", "energy", "l2_p")


@dataclass(frozen=True)
class ErrorReport:
    h: float
    l2_u: float
    h1_u: float
    h2_weighted: float
    jump: float
    energy: float
    l2_p: float

    def as_dict(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in ("h",) + COLUMNS}


def compute_errors(sol: HdgSolution, exact, quad_boost: int = 4) -> ErrorReport:
    """Errors of (u_h, uhat_h, p_h) against an exact solution.

    Integrals use a rule of degree 2(k+1) + quad_boost on elements and the
    matching Gauss rule on edges.
    """
    mesh, spec, k = sol.mesh, sol.spec, sol.k
    geo = element_geometry(mesh)
    deg = 2 * (k + 1) + quad_boost
    ref = reference_element(k, deg)
    x = to_physical(geo, ref.tri_xy)
    wK = geo.det[:, None] * ref.tri_w[None, :]

    uh = np.einsum("kci,qi->kqc", sol.u_coeffs, ref.phi)
    eu = exact.u(x) - uh
    l2_u = np.sum(wK[..., None] * eu**2)

    grads = np.einsum("kab,qia->kqib", geo.invJ, ref.dphi)
    guh = np.einsum("kci,kqid->kqcd", sol.u_coeffs, grads)
    h1_u = np.sum(wK[..., None, None] * (exact.grad_u(x) - guh) ** 2)

    hess_ref = ref.vbasis.hessians(ref.tri_xy)
    hess = np.einsum("kab,qiad,kdc->kqibc", geo.invJ, hess_ref, geo.invJ)
    huh = np.einsum("kci,kqiab->kqcab", sol.u_coeffs, hess)
    h2_el = np.einsum("kq,kqcab->k", wK, (exact.hess_u(x) - huh) ** 2)
    h2w = np.sum(mesh.tri_diameters**2 * h2_el)

    ph = np.einsum("ki,qi->kq", sol.p_coeffs, ref.psi)
    l2_p = np.sum(wK * (exact.p(x) - ph) ** 2)

    # jump of the error pair (u - u_h, u|_Gamma - uhat_h), projected edge by edge
    rule = gauss_legendre_1d(deg // 2 + 1)
    L = EdgeBasis(k).values(rule.points)
    signs = facet_signs(geo, k)
    jump = 0.0
    for j in range(3):
        # element-local parameter s; the global parameter is -s on flipped edges
        xe = to_physical(geo, reference_edge_points(j, rule.points))
        phi_e = ref.vbasis.values(reference_edge_points(j, rule.points))
        u_trace = exact.u(xe)
        elem_err = u_trace - np.einsum("kci,qi->kqc", sol.u_coeffs, phi_e)
        hat = sol.uhat_coeffs[mesh.tri_edges[:, j]]  # global orientation
        hat_vals = np.einsum("kcm,qm,km->kqc", hat, L, signs[:, j])
        facet_err = u_trace - hat_vals
        c = edge_trace_projection(k, np.moveaxis(facet_err - elem_err, 1, 0), rule)  # (k+1, NT, 2)
        h = geo.h_e[:, j]
        jump += np.sum((h / 2) * np.sum(c**2, axis=(0, 2)) / h)
    energy = math.sqrt(h1_u + h2w + jump)
    return ErrorReport(mesh.h, math.sqrt(l2_u), math.sqrt(h1_u), math.sqrt(h2w), math.sqrt(jump), energy, math.sqrt(l2_p))


def broken_h1_seminorm(mesh: Mesh, k: int, u_coeffs: np.ndarray) -> float:
    """|v|_{1,h} of a field in [P_{k+1}(T_h)]^2 given by coefficients (NT, 2, nb)."""
    geo = element_geometry(mesh)
    ref = reference_element(k, 2 * (k + 1))
    grads = np.einsum("kab,qia->kqib", geo.invJ, ref.dphi)
    g = np.einsum("kci,kqid->kqcd", u_coeffs, grads)
    return math.sqrt(np.sum(geo.det[:, None, None, None] * ref.tri_w[None, :, None, None] * g**2))


def pressure_l2(mesh: Mesh, p_coeffs: np.ndarray) -> float:
    """L2 norm of a P_k pressure; the reference basis is orthonormal, so the mass matrix is det * I."""
    det = element_geometry(mesh).det
    return math.sqrt(np.sum(det[:, None] * p_coeffs**2))


def jump_seminorm(sol: HdgSolution) -> float:
    """|(u_h, uhat_h)|_j = (sum_K sum_e h_e^-1 ||P_k(uhat - u)||_e^2)^(1/2)."""
    mesh, k = sol.mesh, sol.k
    geo = element_geometry(mesh)
    vb = reference_element(k, 2 * (k + 1)).vbasis
    rule = gauss_legendre_1d(k + 2)
    L = EdgeBasis(k).values(rule.points)
    signs = facet_signs(geo, k)
    total = 0.0
    for j in range(3):
        phi_e = vb.values(reference_edge_points(j, rule.points))
        hat = sol.uhat_coeffs[mesh.tri_edges[:, j]]
        diff = np.einsum("kcm,qm,km->kqc", hat, L, signs[:, j]) - np.einsum("kci,qi->kqc", sol.u_coeffs, phi_e)
        c = edge_trace_projection(k, np.moveaxis(diff, 1, 0), rule)
        total += np.sum(0.5 * np.sum(c**2, axis=(0, 2)))
    return math.sqrt(total)


@dataclass(frozen=True)
class VelocityGrams:
    """Gram matrices on V_h x Vhat_h (interior facets only, boundary facets zero)."""

    a: sp.csr_matrix
    h1: sp.csr_matrix
    h2_weighted: sp.csr_matrix
    jump: sp.csr_matrix

    @property
    def energy(self) -> sp.csr_matrix:
        return (self.h1 + self.h2_weighted + self.jump).tocsr()


def velocity_grams(mesh: Mesh, spec: SpaceSpec) -> VelocityGrams:
    geo = element_geometry(mesh)
    forms = local_forms(mesh, spec, geo)
    ref = reference_element(spec.k, spec.form_degree)
    nt, nb, nv = mesh.n_triangles, spec.nb, spec.n_v_local

    grads = np.einsum("kab,qia->kqib", geo.invJ, ref.dphi)
    wK = geo.det[:, None] * ref.tri_w[None, :]
    S = np.einsum("kq,kqia,kqja->kij", wK, grads, grads)
    hess = np.einsum("kab,qiad,kdc->kqibc", geo.invJ, ref.vbasis.hessians(ref.tri_xy), geo.invJ)
    H = mesh.tri_diameters[:, None, None] ** 2 * np.einsum("kq,kqiab,kqjab->kij", wK, hess, hess)
    h1 = np.zeros((nt, nv, nv))
    h2 = np.zeros((nt, nv, nv))
    for c in range(2):
        s = slice(c * nb, (c + 1) * nb)
        h1[:, s, s] = S
        h2[:, s, s] = H
    jump = forms.stabilization / spec.tau

    dm = build_dof_map(mesh, spec)
    n = dm.n_u + dm.n_hat
    l2g = dm.local_to_global(mesh)[:, :nv]

    def glob(local):
        acc = SparseMatrix((dm.size + dm.n_bnd,) * 2)
        acc.add(l2g[:, :, None], l2g[:, None, :], local)
        return acc.tocsr()[:n, :n].tocsr()

    return VelocityGrams(glob(forms.A), glob(h1), glob(h2), glob(jump))


@dataclass
class EocTable:
    reports: list[ErrorReport]
    orders: dict[str, list[float | None]] = field(default_factory=dict)

    @property
    def hs(self) -> list[float]:
        return [r.h for r in self.reports]

    def last_orders(self) -> dict[str, float]:
        return {c: v[-1] for c, v in self.orders.items()}

    def format(self, columns=("l2_u", "h1_u", "l2_p")) -> str:
        head = f"{'h':>8} " + " ".join(f"{c:>10} {'order':>6}" for c in columns)
        lines = [head]
        for i, r in enumerate(self.reports):
            cells = []
            for c in columns:
                o = self.orders[c][i]
                cells.append(f"{getattr(r, c):10.3E} {('--' if o is None else f'{o:.2f}'):>6}")
            lines.append(f"{r.h:8.4f} " + " ".join(cells))
        return "\n".join(lines)


def eoc_pair(e1: float, e2: float, h1: float, h2: float) -> float:
    return math.log(e1 / e2) / math.log(h1 / h2)


def eoc(reports) -> EocTable:
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("at least two levels are needed")
    hs = [r.h for r in reports]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError(f"mesh sizes must decrease strictly: {hs}")
    orders = {}
    for c in COLUMNS:
        col: list[float | None] = [None]
        for a, b in zip(reports, reports[1:]):
            ea, eb = getattr(a, c), getattr(b, c)
            col.append(eoc_pair(ea, eb, a.h, b.h) if ea > 0 and eb > 0 else float("nan"))
        orders[c] = col
    return EocTable(reports, orders)


class DimensionGuardError(ValueError):
    pass


def infsup_estimate(mesh: Mesh, spec: SpaceSpec, max_dim: int = 3000) -> float:
    """Smallest generalized singular value of b_h for the energy norm and the L2 norm on Q_h.

    The constant pressure (the kernel of b_h on V_h x Vhat_h) is removed
    explicitly before the eigensolve.
    """
    dm = build_dof_map(mesh, spec)
    n_v = dm.n_u + dm.n_hat
    if n_v > max_dim:
        raise DimensionGuardError(f"velocity space dimension {n_v} exceeds guard {max_dim}")
    geo = element_geometry(mesh)
    forms = local_forms(mesh, spec, geo)
    nv = spec.n_v_local
    l2g = dm.local_to_global(mesh)[:, :nv]
    acc = SparseMatrix((dm.n_p, dm.size + dm.n_bnd))
    prow = dm.p_dofs - (dm.n_u + dm.n_hat)
    acc.add(prow[:, :, None], l2g[:, None, :], forms.B)
    B = acc.tocsr()[:, :n_v].toarray()
    X = velocity_grams(mesh, spec).energy.toarray()

    c, low = scipy.linalg.cho_factor(X)
    S = B @ scipy.linalg.cho_solve((c, low), B.T)
    msqrt = np.sqrt(np.repeat(geo.det, spec.npr))
    S = S / msqrt[:, None] / msqrt[None, :]
    const = np.zeros((mesh.n_triangles, spec.npr))
    const[:, 0] = 1.0
    const = const.ravel() * msqrt
    Z = scipy.linalg.null_space(const[None, :] / np.linalg.norm(const))
    lam = scipy.linalg.eigvalsh(Z.T @ S @ Z)
    return float(math.sqrt(max(lam[0], 0.0)))
