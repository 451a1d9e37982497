"""Crouzeix-Raviart (P1 nonconforming / P0) Stokes solver.

Velocity DOFs are edge-midpoint values, two per edge.  On a triangle the
basis function of local edge i is 1 - 2 lambda_i, where lambda_i is the
barycentric coordinate of the opposite vertex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import tri_quadrature
from .hdg import HdgSolution, SpaceSpec, element_geometry, project_to_edges, reference_element, to_physical
from .mesh import Mesh
from .solver import SolveReport, SparseMatrix, factorize, solve

# value of the constant orthonormal P0 function on the reference triangle
P0_VALUE = math.sqrt(2.0)
# value of the constant orthonormal Legendre polynomial on [-1, 1]
L0_VALUE = 1.0 / math.sqrt(2.0)


@dataclass
class CrSolution:
    mesh: Mesh
    velocity: np.ndarray  # (NE, 2) midpoint values
    pressure: np.ndarray  # (NT,) element values
    multiplier: float = 0.0
    report: SolveReport | None = None

    def gradients(self) -> np.ndarray:
        """Element-wise constant velocity gradients, (NT, 2, 2) as [component, direction]."""
        grad_phi = cr_basis_gradients(self.mesh)
        vals = self.velocity[self.mesh.tri_edges]  # (NT, 3, 2)
        return np.einsum("kic,kid->kcd", vals, grad_phi)


def cr_basis_gradients(mesh: Mesh) -> np.ndarray:
    """(NT, 3, 2) gradients of the three edge basis functions."""
    geo = element_geometry(mesh)
    # reference barycentric gradients
    gl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grad_lam = np.einsum("kab,ia->kib", geo.invJ, gl)
    return -2.0 * grad_lam


def _cr_values(xy: np.ndarray) -> np.ndarray:
    lam = np.column_stack([1 - xy[:, 0] - xy[:, 1], xy[:, 0], xy[:, 1]])
    return 1.0 - 2.0 * lam


def solve_cr(mesh: Mesh, f=None, g=None, load_degree: int = 6, ordering: str = "COLAMD") -> CrSolution:
    """Solve (grad u, grad v) - (div v, p) = (f, v), (div u, q) = 0 with mean-zero p.

    Boundary edges carry the edge mean of ``g`` (zero when ``g`` is None).
    ``load_degree`` must match the HDG load quadrature for like-for-like comparisons.
    """
    geo = element_geometry(mesh)
    nt, ne = mesh.n_triangles, mesh.n_edges
    area = geo.det / 2
    G = cr_basis_gradients(mesh)
    S = area[:, None, None] * np.einsum("kia,kja->kij", G, G)

    bnd = np.flatnonzero(mesh.is_boundary)
    interior = mesh.interior_edges
    # velocity dof (edge e, comp c): interior ones are numbered, boundary ones sit after the system
    n_vel = 2 * interior.size
    N = n_vel + nt + 1
    vdof = np.empty((ne, 2), dtype=np.int64)
    vdof[interior] = np.arange(n_vel).reshape(-1, 2)
    vdof[bnd] = N + np.arange(2 * bnd.size).reshape(-1, 2)
    pdof = n_vel + np.arange(nt)
    lam = N - 1

    acc = SparseMatrix((N + 2 * bnd.size,) * 2)
    tv = vdof[mesh.tri_edges]  # (NT, 3, 2)
    for c in range(2):
        d = tv[:, :, c]
        acc.add(d[:, :, None], d[:, None, :], S)
        # -(div v, q) with q = 1 on the element
        Bc = -area[:, None] * G[:, :, c]
        acc.add(pdof[:, None], d, Bc)
        acc.add(d, pdof[:, None], Bc)
    acc.add(lam, pdof, area)
    acc.add(pdof, lam, area)
    full = acc.tocsr()

    rhs = np.zeros(N + 2 * bnd.size)
    if f is not None:
        rule = tri_quadrature(load_degree)
        x = to_physical(geo, rule.xy)
        fx = f(x)
        F = np.einsum("kq,kqc,qi->kic", geo.det[:, None] * rule.weights[None, :], fx, _cr_values(rule.xy))
        np.add.at(rhs, tv, F)
    gvals = np.zeros((ne, 2))
    if g is not None and bnd.size:
        gvals[bnd] = project_to_edges(mesh, 0, g, bnd, load_degree)[:, :, 0] * L0_VALUE
    gvec = gvals[bnd].ravel()

    A = full[:N, :N].tocsr()
    b = rhs[:N] - full[:N, N:] @ gvec
    x, report = solve(factorize(A, ordering), b)
    vel = gvals.copy()
    vel[interior] = x[:n_vel].reshape(-1, 2)
    return CrSolution(mesh, vel, x[pdof], float(x[lam]), report)


def cr_velocity_block(mesh: Mesh) -> sp.csr_matrix:
    """Vector CR stiffness on interior-edge DOFs."""
    geo = element_geometry(mesh)
    G = cr_basis_gradients(mesh)
    S = (geo.det / 2)[:, None, None] * np.einsum("kia,kja->kij", G, G)
    interior = mesh.interior_edges
    idx = np.full(mesh.n_edges, -1)
    idx[interior] = np.arange(interior.size)
    n = interior.size
    acc = SparseMatrix((2 * n + 1, 2 * n + 1))
    te = idx[mesh.tri_edges]
    te = np.where(te < 0, 2 * n, te)  # boundary rows/cols go to a discarded slot
    for c in range(2):
        d = np.where(te == 2 * n, 2 * n, 2 * te + c)
        acc.add(d[:, :, None], d[:, None, :], S)
    return acc.tocsr()[: 2 * n, : 2 * n].tocsr()


def cr_divergence_residual(sol: CrSolution) -> float:
    """max_K |(div u*, 1)_K|."""
    geo = element_geometry(sol.mesh)
    div = np.einsum("kcc->k", sol.gradients())
    return float(np.abs(geo.det / 2 * div).max())


def cr_interpolate(uhat_coeffs: np.ndarray, mesh: Mesh, k: int = 0) -> np.ndarray:
    """Crouzeix-Raviart interpolation of facet data: the midpoint value is the edge mean.

    For k = 0 the facet function is constant, so this is a rescaling of the
    Legendre coefficient.  Returns (NE, 2).
    """
    if k != 0:
        raise ValueError("CR interpolation of facet coefficients is defined here for k = 0 only")
    uhat_coeffs = np.asarray(uhat_coeffs)
    if uhat_coeffs.shape[0] != mesh.n_edges:
        raise ValueError("facet coefficients do not match the mesh")
    # edge mean of sum_m c_m L_m is c_0 L_0 since higher modes have zero mean
    return uhat_coeffs[:, :, 0] * L0_VALUE


@dataclass(frozen=True)
class Discrepancy:
    midpoint_velocity: float
    pressure: float


def compare_with_hdg(hdg: HdgSolution, cr: CrSolution) -> Discrepancy:
    if hdg.k != 0:
        raise ValueError("the comparison needs the k = 0 HDG solution")
    if hdg.mesh is not cr.mesh and (
        hdg.mesh.n_triangles != cr.mesh.n_triangles
        or not np.array_equal(hdg.mesh.triangles, cr.mesh.triangles)
        or not np.allclose(hdg.mesh.vertices, cr.mesh.vertices, rtol=0, atol=1e-14)
    ):
        raise ValueError("HDG and CR solutions live on different meshes")
    mid = cr_interpolate(hdg.uhat_coeffs, hdg.mesh, 0)
    p_hdg = hdg.p_coeffs[:, 0] * P0_VALUE
    return Discrepancy(float(np.abs(mid - cr.velocity).max()), float(np.abs(p_hdg - cr.pressure).max()))


def hdg_cr_differences(hdg: HdgSolution, cr: CrSolution) -> tuple[float, float]:
    """(|u* - u_h|_{1,h}, ||p* - p_h||) between a CR solution and an HDG solution of any k."""
    mesh, k = hdg.mesh, hdg.k
    geo = element_geometry(mesh)
    ref = reference_element(k, 2 * (k + 1))
    grads = np.einsum("kab,qia->kqib", geo.invJ, ref.dphi)
    gh = np.einsum("kci,kqid->kqcd", hdg.u_coeffs, grads)
    diff = cr.gradients()[:, None] - gh
    wK = geo.det[:, None] * ref.tri_w[None, :]
    h1 = math.sqrt(np.sum(wK[..., None, None] * diff**2))
    ph = np.einsum("ki,qi->kq", hdg.p_coeffs, ref.psi)
    l2p = math.sqrt(np.sum(wK * (cr.pressure[:, None] - ph) ** 2))
    return h1, l2p
