"""Reduced-stabilization HDG discretization of the Stokes problem.

Unknowns are element velocities in P_{k+1}, facet velocities in P_k and
element pressures in P_k.  Element bases are orthonormal on the reference
triangle; facet unknowns are coefficients of the orthonormal Legendre basis
in the edge parameter t in [-1, 1], oriented from the lower to the higher
global vertex index so both neighbours see the same facet functions.

Local DOF layout on an element::

    [u_0 (nb), u_1 (nb) | edge0 comp0 (k+1), edge0 comp1, edge1 ..., edge2 ... | p (np)]
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .basis import (
    EDGE_LOCAL_VERTICES,
    EdgeBasis,
    build_tri_basis,
    gauss_legendre_1d,
    reference_edge_points,
    tri_quadrature,
)
from .mesh import Mesh
from .solver import SolveReport, SparseMatrix, factorize, solve


def default_tau(k: int) -> float:
    return 10.0 * (k + 1) ** 2


@dataclass(frozen=True)
class SpaceSpec:
    k: int
    tau: float | None = None
    quad_boost: int = 4

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise ValueError(f"k must be 0, 1 or 2, got {self.k}")
        if self.tau is None:
            object.__setattr__(self, "tau", default_tau(self.k))
        if self.tau < 1.0:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.quad_boost < 0:
            raise ValueError("quad_boost must be non-negative")

    @property
    def velocity_degree(self) -> int:
        return self.k + 1

    @property
    def nb(self) -> int:
        """Scalar basis size of P_{k+1}."""
        return (self.k + 2) * (self.k + 3) // 2

    @property
    def npr(self) -> int:
        return (self.k + 1) * (self.k + 2) // 2

    @property
    def nf(self) -> int:
        """Scalar facet basis size of P_k."""
        return self.k + 1

    @property
    def n_u_local(self) -> int:
        return 2 * self.nb

    @property
    def n_facet_local(self) -> int:
        return 2 * self.nf

    @property
    def n_v_local(self) -> int:
        return self.n_u_local + 3 * self.n_facet_local

    @property
    def n_local(self) -> int:
        return self.n_v_local + self.npr

    @property
    def form_degree(self) -> int:
        return 2 * (self.k + 1)

    @property
    def load_degree(self) -> int:
        return 2 * (self.k + 1) + self.quad_boost


@dataclass(frozen=True)
class ReferenceElement:
    k: int
    rule_degree: int
    vbasis: object
    pbasis: object
    tri_xy: np.ndarray
    tri_w: np.ndarray
    phi: np.ndarray  # (nq, nb)
    dphi: np.ndarray  # (nq, nb, 2)
    psi: np.ndarray  # (nq, np)
    edge_t: np.ndarray
    edge_w: np.ndarray
    edge_L: np.ndarray  # (nqe, k+1), Legendre in the local parameter
    edge_phi: np.ndarray  # (3, nqe, nb)
    edge_dphi: np.ndarray  # (3, nqe, nb, 2)
    edge_psi: np.ndarray  # (3, nqe, np)


@lru_cache(maxsize=None)
def reference_element(k: int, rule_degree: int) -> ReferenceElement:
    vb = build_tri_basis(k + 1)
    pb = build_tri_basis(k)
    rule = tri_quadrature(rule_degree)
    xy = rule.xy
    er = gauss_legendre_1d(rule_degree // 2 + 1)
    epts = [reference_edge_points(j, er.points) for j in range(3)]
    return ReferenceElement(
        k=k,
        rule_degree=rule_degree,
        vbasis=vb,
        pbasis=pb,
        tri_xy=xy,
        tri_w=rule.weights,
        phi=vb.values(xy),
        dphi=vb.gradients(xy),
        psi=pb.values(xy),
        edge_t=er.points,
        edge_w=er.weights,
        edge_L=EdgeBasis(k).values(er.points),
        edge_phi=np.stack([vb.values(p) for p in epts]),
        edge_dphi=np.stack([vb.gradients(p) for p in epts]),
        edge_psi=np.stack([pb.values(p) for p in epts]),
    )


@dataclass(frozen=True)
class Geometry:
    """Affine maps and per-(element, local edge) data."""

    P: np.ndarray  # (NT, 3, 2)
    J: np.ndarray
    det: np.ndarray
    invJ: np.ndarray
    normals: np.ndarray  # (NT, 3, 2) outward
    h_e: np.ndarray  # (NT, 3)
    flip: np.ndarray  # (NT, 3) local parameter runs against the global edge orientation


def element_geometry(mesh: Mesh) -> Geometry:
    P = mesh.vertices[mesh.triangles]
    J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0):
        bad = np.flatnonzero(det <= 0)
        raise ValueError(f"degenerate or clockwise triangles: {bad[:10].tolist()}")
    invJ = np.linalg.inv(J)
    normals = np.empty((mesh.n_triangles, 3, 2))
    flip = np.empty((mesh.n_triangles, 3), dtype=bool)
    for j, (a, b) in enumerate(EDGE_LOCAL_VERTICES):
        d = P[:, b] - P[:, a]
        normals[:, j] = np.column_stack([d[:, 1], -d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
        flip[:, j] = mesh.triangles[:, a] > mesh.triangles[:, b]
    h_e = mesh.edge_lengths[mesh.tri_edges]
    return Geometry(P, J, det, invJ, normals, h_e, flip)


def to_physical(geo: Geometry, xy: np.ndarray) -> np.ndarray:
    """Map reference points (..., 2) to every element: (NT, ..., 2)."""
    return geo.P[:, None, 0, :] + np.einsum("kab,qb->kqa", geo.J, xy.reshape(-1, 2)).reshape(
        (geo.J.shape[0],) + xy.shape
    )


def facet_signs(geo: Geometry, k: int) -> np.ndarray:
    """(NT, 3, k+1) factors turning local-parameter Legendre values into global-orientation ones."""
    parity = (-1.0) ** np.arange(k + 1)
    return np.where(geo.flip[:, :, None], parity, 1.0)


@dataclass
class LocalForms:
    """Element matrices in the local layout, vectorized over elements."""

    spec: SpaceSpec
    A: np.ndarray  # (NT, n_v_local, n_v_local), a_h
    B: np.ndarray  # (NT, np, n_v_local), b_h(v, vhat; q)
    stabilization: np.ndarray  # (NT, n_v_local, n_v_local), part of A
    mass_p: np.ndarray  # (NT, np), integrals of the pressure basis
    geometry: Geometry = field(repr=False)

    def full(self) -> np.ndarray:
        nt = self.A.shape[0]
        nv = self.spec.n_v_local
        M = np.zeros((nt, self.spec.n_local, self.spec.n_local))
        M[:, :nv, :nv] = self.A
        M[:, nv:, :nv] = self.B
        M[:, :nv, nv:] = np.transpose(self.B, (0, 2, 1))
        return M

    def element_blocks(self, K: int) -> dict[str, np.ndarray]:
        nu = self.spec.n_u_local
        return {
            "A_uu": self.A[K, :nu, :nu],
            "A_uh": self.A[K, :nu, nu:],
            "A_hh": self.A[K, nu:, nu:],
            "B_u": self.B[K, :, :nu],
            "B_h": self.B[K, :, nu:],
        }


def _facet_slice(spec: SpaceSpec, j: int, c: int) -> slice:
    start = spec.n_u_local + j * spec.n_facet_local + c * spec.nf
    return slice(start, start + spec.nf)


def _u_slice(spec: SpaceSpec, c: int) -> slice:
    return slice(c * spec.nb, (c + 1) * spec.nb)


def local_forms(mesh: Mesh, spec: SpaceSpec, geo: Geometry | None = None) -> LocalForms:
    """Element matrices of a_h and b_h for every triangle.

    a_h = (grad u, grad v) + <d_n u, vhat - v> + <d_n v, uhat - u>
          + tau/h_e <P_k(uhat - u), P_k(vhat - v)>
    b_h = -(div v, q) - <vhat - v, q n>
    """
    geo = geo or element_geometry(mesh)
    ref = reference_element(spec.k, spec.form_degree)
    nt, nb, nf, k, tau = mesh.n_triangles, spec.nb, spec.nf, spec.k, spec.tau
    nv = spec.n_v_local

    grads = np.einsum("kab,qia->kqib", geo.invJ, ref.dphi)
    wK = geo.det[:, None] * ref.tri_w[None, :]
    S = np.einsum("kq,kqia,kqja->kij", wK, grads, grads)

    A = np.zeros((nt, nv, nv))
    stab = np.zeros((nt, nv, nv))
    B = np.zeros((nt, spec.npr, nv))
    for c in range(2):
        uc = _u_slice(spec, c)
        A[:, uc, uc] += S
        B[:, :, uc] -= np.einsum("kq,qi,kqj->kij", wK, ref.psi, grads[..., c])

    signs = facet_signs(geo, k)
    for j in range(3):
        h = geo.h_e[:, j]
        n = geo.normals[:, j]
        we = ref.edge_w[None, :] * (h / 2)[:, None]
        phi = ref.edge_phi[j]
        dn = np.einsum("kab,qia,kb->kqi", geo.invJ, ref.edge_dphi[j], n)
        Lg = ref.edge_L[None, :, :] * signs[:, j, None, :]
        # projection of traces in the L2(e)-orthonormal Legendre basis
        T = np.sqrt(2 / h)[:, None, None] * np.einsum("kq,kqm,qi->kmi", we, Lg, phi)
        D = np.sqrt(h / 2)
        consist = np.einsum("kq,qi,kqj->kij", we, phi, dn)
        cross = np.einsum("kq,kqi,kqm->kim", we, dn, Lg)
        pu = np.einsum("kq,qi,qj->kij", we, ref.edge_psi[j], phi)
        ph = np.einsum("kq,qi,kqm->kim", we, ref.edge_psi[j], Lg)
        s = (tau / h)[:, None, None]
        for c in range(2):
            uc, fc = _u_slice(spec, c), _facet_slice(spec, j, c)
            A[:, uc, uc] -= consist + np.transpose(consist, (0, 2, 1))
            A[:, uc, fc] += cross
            A[:, fc, uc] += np.transpose(cross, (0, 2, 1))
            # stabilization acts on D*uhat - T*u
            blk_uu = s * np.einsum("kmi,kmj->kij", T, T)
            blk_uh = -s * np.transpose(T, (0, 2, 1)) * D[:, None, None]
            blk_hh = (tau / 2) * np.eye(nf)
            stab[:, uc, uc] += blk_uu
            stab[:, uc, fc] += blk_uh
            stab[:, fc, uc] += np.transpose(blk_uh, (0, 2, 1))
            stab[:, fc, fc] += blk_hh
            B[:, :, uc] += n[:, c, None, None] * pu
            B[:, :, fc] -= n[:, c, None, None] * ph
    A += stab
    mass_p = geo.det[:, None] * (ref.tri_w @ ref.psi)[None, :]
    return LocalForms(spec, A, B, stab, mass_p, geo)


def reduced_quadrature_stabilization(mesh: Mesh, spec: SpaceSpec, geo: Geometry | None = None) -> np.ndarray:
    """tau/h_e <uhat - u, vhat - v> evaluated with the (k+1)-point Gauss rule on each edge.

    The rule's nodes are the zeros of L_{k+1}, so it drops the degree k+1
    part of the trace and reproduces the projected stabilization.
    """
    geo = geo or element_geometry(mesh)
    vb = build_tri_basis(spec.k + 1)
    er = gauss_legendre_1d(spec.k + 1)
    L = EdgeBasis(spec.k).values(er.points)
    signs = facet_signs(geo, spec.k)
    nt, nv = mesh.n_triangles, spec.n_v_local
    out = np.zeros((nt, nv, nv))
    for j in range(3):
        phi = vb.values(reference_edge_points(j, er.points))
        we = er.weights[None, :] * (geo.h_e[:, j] / 2)[:, None]
        Lg = L[None] * signs[:, j, None, :]
        s = (spec.tau / geo.h_e[:, j])[:, None, None]
        for c in range(2):
            # trace of the jump (vhat - v) as rows over the local DOFs
            tr = np.zeros((nt, er.points.size, nv))
            tr[:, :, _u_slice(spec, c)] = -phi[None]
            tr[:, :, _facet_slice(spec, j, c)] = Lg
            out += s * np.einsum("kq,kqi,kqj->kij", we, tr, tr)
    return out


@dataclass(frozen=True)
class DofMap:
    n_u: int
    n_hat: int
    n_p: int
    n_bnd: int
    u_dofs: np.ndarray  # (NT, 2nb)
    facet_dofs: np.ndarray  # (NE, 2(k+1)); boundary facets map to [size, size + n_bnd)
    p_dofs: np.ndarray  # (NT, np)
    interior_edges: np.ndarray
    boundary_edges: np.ndarray

    @property
    def size(self) -> int:
        return self.n_u + self.n_hat + self.n_p + 1

    @property
    def multiplier(self) -> int:
        return self.size - 1

    @property
    def u_range(self) -> range:
        return range(0, self.n_u)

    @property
    def hat_range(self) -> range:
        return range(self.n_u, self.n_u + self.n_hat)

    @property
    def p_range(self) -> range:
        return range(self.n_u + self.n_hat, self.n_u + self.n_hat + self.n_p)

    def local_to_global(self, mesh: Mesh) -> np.ndarray:
        parts = [self.u_dofs] + [self.facet_dofs[mesh.tri_edges[:, j]] for j in range(3)] + [self.p_dofs]
        return np.concatenate(parts, axis=1)


def build_dof_map(mesh: Mesh, spec: SpaceSpec) -> DofMap:
    nt = mesh.n_triangles
    interior = mesh.interior_edges
    boundary = np.flatnonzero(mesh.is_boundary)
    nfl = spec.n_facet_local
    n_u = nt * spec.n_u_local
    n_hat = interior.size * nfl
    n_p = nt * spec.npr
    size = n_u + n_hat + n_p + 1
    u_dofs = np.arange(n_u).reshape(nt, spec.n_u_local)
    facet = np.empty((mesh.n_edges, nfl), dtype=np.int64)
    facet[interior] = n_u + np.arange(n_hat).reshape(-1, nfl)
    facet[boundary] = size + np.arange(boundary.size * nfl).reshape(-1, nfl)
    p_dofs = n_u + n_hat + np.arange(n_p).reshape(nt, spec.npr)
    return DofMap(n_u, n_hat, n_p, boundary.size * nfl, u_dofs, facet, p_dofs, interior, boundary)


def edge_points(mesh: Mesh, edges: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Physical points (len(edges), len(t), 2) in the global edge parameterization."""
    a = mesh.vertices[mesh.edges[edges, 0]][:, None, :]
    b = mesh.vertices[mesh.edges[edges, 1]][:, None, :]
    tt = t[None, :, None]
    return 0.5 * (1 - tt) * a + 0.5 * (1 + tt) * b


def project_to_edges(mesh: Mesh, k: int, g, edges: np.ndarray, degree: int) -> np.ndarray:
    """Edge-wise L2 projection onto P_k of a vector field: (len(edges), 2, k+1) Legendre coefficients."""
    rule = gauss_legendre_1d(max(degree, 2 * k + 2) // 2 + 1)
    L = EdgeBasis(k).values(rule.points)
    vals = g(edge_points(mesh, edges, rule.points))  # (E, q, 2)
    return np.einsum("q,qm,eqc->ecm", rule.weights, L, vals)


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: DofMap
    mesh: Mesh
    spec: SpaceSpec
    boundary_values: np.ndarray  # (NE, 2, k+1), zero on interior edges
    forms: LocalForms = field(repr=False)
    f_norm: float = 0.0

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass
class HdgSolution:
    mesh: Mesh
    spec: SpaceSpec
    u_coeffs: np.ndarray  # (NT, 2, nb)
    uhat_coeffs: np.ndarray  # (NE, 2, k+1)
    p_coeffs: np.ndarray  # (NT, np)
    multiplier: float = 0.0
    report: SolveReport | None = None

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def tau(self) -> float:
        return self.spec.tau

    def local_vector(self) -> np.ndarray:
        """(NT, n_v_local) element-local velocity DOFs (u and the three facets)."""
        tri_hat = self.uhat_coeffs[self.mesh.tri_edges].reshape(self.mesh.n_triangles, -1)
        return np.concatenate([self.u_coeffs.reshape(self.mesh.n_triangles, -1), tri_hat], axis=1)

    def pressure_mean(self) -> float:
        ref = reference_element(self.k, self.spec.form_degree)
        det = element_geometry(self.mesh).det
        return float(np.sum(det[:, None] * (ref.tri_w @ ref.psi)[None, :] * self.p_coeffs))


def load_vector(mesh: Mesh, spec: SpaceSpec, f, geo: Geometry | None = None) -> tuple[np.ndarray, float]:
    """(f, v) for every local velocity basis function, and ||f||_{L2}."""
    geo = geo or element_geometry(mesh)
    ref = reference_element(spec.k, spec.load_degree)
    x = to_physical(geo, ref.tri_xy)
    fx = f(x)  # (NT, q, 2)
    wK = geo.det[:, None] * ref.tri_w[None, :]
    F = np.einsum("kq,kqc,qi->kci", wK, fx, ref.phi).reshape(mesh.n_triangles, -1)
    return F, float(np.sqrt(np.sum(wK[..., None] * fx**2)))


def assemble(mesh: Mesh, spec: SpaceSpec, f=None, g=None) -> GlobalSystem:
    """Global saddle-point system with boundary facets eliminated and a mean-zero multiplier."""
    geo = element_geometry(mesh)
    forms = local_forms(mesh, spec, geo)
    dm = build_dof_map(mesh, spec)
    N, nbnd = dm.size, dm.n_bnd
    l2g = dm.local_to_global(mesh)
    M = forms.full()

    acc = SparseMatrix((N + nbnd, N + nbnd))
    acc.add(l2g[:, :, None], l2g[:, None, :], M)
    lam = dm.multiplier
    acc.add(lam, dm.p_dofs, forms.mass_p)
    acc.add(dm.p_dofs, lam, forms.mass_p)
    full = acc.tocsr()

    rhs_full = np.zeros(N + nbnd)
    f_norm = 0.0
    if f is not None:
        F, f_norm = load_vector(mesh, spec, f, geo)
        np.add.at(rhs_full, dm.u_dofs, F)

    bvals = np.zeros((mesh.n_edges, 2, spec.nf))
    if g is not None and dm.boundary_edges.size:
        bvals[dm.boundary_edges] = project_to_edges(mesh, spec.k, g, dm.boundary_edges, spec.load_degree)
    gvec = np.zeros(nbnd)
    gvec[dm.facet_dofs[dm.boundary_edges].ravel() - N] = bvals[dm.boundary_edges].reshape(-1)

    A = full[:N, :N].tocsr()
    rhs = rhs_full[:N] - full[:N, N:] @ gvec
    return GlobalSystem(A, rhs, dm, mesh, spec, bvals, forms, f_norm)


def solution_from_vector(sys: GlobalSystem, x: np.ndarray, report: SolveReport | None = None) -> HdgSolution:
    dm, spec, mesh = sys.dof_map, sys.spec, sys.mesh
    nt = mesh.n_triangles
    uhat = sys.boundary_values.copy()
    uhat[dm.interior_edges] = x[dm.facet_dofs[dm.interior_edges]].reshape(-1, 2, spec.nf)
    return HdgSolution(
        mesh=mesh,
        spec=spec,
        u_coeffs=x[dm.u_dofs].reshape(nt, 2, spec.nb),
        uhat_coeffs=uhat,
        p_coeffs=x[dm.p_dofs],
        multiplier=float(x[dm.multiplier]),
        report=report,
    )


def solution_to_vector(sys: GlobalSystem, sol: HdgSolution) -> np.ndarray:
    dm = sys.dof_map
    x = np.zeros(dm.size)
    x[dm.u_dofs] = sol.u_coeffs.reshape(sol.mesh.n_triangles, -1)
    x[dm.facet_dofs[dm.interior_edges]] = sol.uhat_coeffs[dm.interior_edges].reshape(-1, dm.facet_dofs.shape[1])
    x[dm.p_dofs] = sol.p_coeffs
    x[dm.multiplier] = sol.multiplier
    return x


def solve_full(sys: GlobalSystem, ordering: str = "COLAMD") -> HdgSolution:
    x, report = solve(factorize(sys.matrix, ordering), sys.rhs)
    return solution_from_vector(sys, x, report)


def divergence_residual(sol: HdgSolution, forms: LocalForms | None = None) -> float:
    """max_q |b_h(u_h, uhat_h; q)| over the pressure basis functions."""
    forms = forms or local_forms(sol.mesh, sol.spec)
    r = np.einsum("kpv,kv->kp", forms.B, sol.local_vector())
    return float(np.abs(r).max())


def consistency_residual(exact, mesh: Mesh, spec: SpaceSpec) -> tuple[float, float]:
    """Residuals of the discrete equations with the exact solution inserted.

    Returns (max_i |a_h(u, u|_Gamma; phi_i) + b_h(phi_i; p) - (f, phi_i)|,
    max_j |b_h(u, u|_Gamma; q_j)|) over velocity test functions in
    V_h x Vhat_h (interior facets) and all pressure basis functions.
    Since uhat = u on every edge, the terms containing uhat - u vanish
    identically and are omitted.
    """
    geo = element_geometry(mesh)
    deg = spec.load_degree
    ref = reference_element(spec.k, deg)
    nt, nb = mesh.n_triangles, spec.nb

    x = to_physical(geo, ref.tri_xy)
    wK = geo.det[:, None] * ref.tri_w[None, :]
    grads = np.einsum("kab,qia->kqib", geo.invJ, ref.dphi)
    gu = exact.grad_u(x)  # (NT, q, c, d)
    px = exact.p(x)
    fx = exact.f(x)
    r_u = np.einsum("kq,kqcd,kqid->kci", wK, gu, grads)
    r_u -= np.einsum("kq,kq,kqic->kci", wK, px, grads)
    r_u -= np.einsum("kq,kqc,qi->kci", wK, fx, ref.phi)
    r_q = -np.einsum("kq,kqcc,qi->ki", wK, gu, ref.psi)

    signs = facet_signs(geo, spec.k)
    r_hat = np.zeros((nt, 3, 2, spec.nf))
    for j in range(3):
        xe = to_physical(geo, reference_edge_points(j, ref.edge_t))
        n = geo.normals[:, j]
        we = ref.edge_w[None, :] * (geo.h_e[:, j] / 2)[:, None]
        dnu = np.einsum("kqcd,kd->kqc", exact.grad_u(xe), n)
        pe = exact.p(xe)
        flux = dnu - pe[..., None] * n[:, None, :]  # d_n u - p n
        r_u -= np.einsum("kq,kqc,qi->kci", we, flux, ref.edge_phi[j])
        Lg = ref.edge_L[None] * signs[:, j, None, :]
        r_hat[:, j] = np.einsum("kq,kqc,kqm->kcm", we, flux, Lg)

    per_edge = np.zeros((mesh.n_edges, 2, spec.nf))
    for j in range(3):
        np.add.at(per_edge, mesh.tri_edges[:, j], r_hat[:, j])
    per_edge = per_edge[mesh.interior_edges]
    vel = max(np.abs(r_u).max(initial=0.0), np.abs(per_edge).max(initial=0.0))
    return float(vel), float(np.abs(r_q).max(initial=0.0))


def element_projection(mesh: Mesh, k: int, v, degree: int, geo: Geometry | None = None) -> np.ndarray:
    """Element-wise L2 projection of a vector field onto P_{k+1}: (NT, 2, nb)."""
    geo = geo or element_geometry(mesh)
    ref = reference_element(k, degree)
    vals = v(to_physical(geo, ref.tri_xy))
    # physical mass matrix is det * I for the orthonormal reference basis
    return np.einsum("q,kqc,qi->kci", ref.tri_w, vals, ref.phi)


def fortin_check(field, mesh: Mesh, spec: SpaceSpec) -> float:
    """max_q |b_h(Pi v, Pihat v; q) + (div v, q)| over the pressure basis.

    ``field`` provides ``u`` and ``divergence``; Pi and Pihat are the element
    and edge L2 projections, applied on every edge including boundary ones.
    """
    geo = element_geometry(mesh)
    forms = local_forms(mesh, spec, geo)
    deg = spec.load_degree
    ucoef = element_projection(mesh, spec.k, field.u, deg, geo)
    hat = project_to_edges(mesh, spec.k, field.u, np.arange(mesh.n_edges), deg)
    sol = HdgSolution(mesh, spec, ucoef, hat, np.zeros((mesh.n_triangles, spec.npr)))
    b = np.einsum("kpv,kv->kp", forms.B, sol.local_vector())
    ref = reference_element(spec.k, deg)
    x = to_physical(geo, ref.tri_xy)
    div = np.einsum("kq,kq,qi->ki", geo.det[:, None] * ref.tri_w[None, :], field.divergence(x), ref.psi)
    return float(np.abs(b + div).max())
