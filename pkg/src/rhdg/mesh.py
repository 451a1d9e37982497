"""Conforming triangulations of the unit square with full edge topology."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with derived edge adjacency.

    ``tri_edges[K, i]`` is the edge opposite local vertex ``i`` of triangle ``K``.
    Edges store their vertices in increasing global order; ``edge_tris`` holds
    the adjacent triangles in increasing order with -1 for a missing neighbour.
    ``edge_normals`` point out of the lower-indexed adjacent triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    edge_tris: np.ndarray
    edge_lengths: np.ndarray = field(repr=False)
    edge_normals: np.ndarray = field(repr=False)
    tri_diameters: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "Mesh":
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        nt = triangles.shape[0]
        # local edge i is opposite vertex i
        loc = np.stack([triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1)
        keys = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        tri_edges = inverse.reshape(nt, 3)

        edge_tris = np.full((edges.shape[0], 2), -1, dtype=np.int64)
        owner = np.repeat(np.arange(nt), 3)
        order = np.lexsort((owner, inverse))
        counts = np.bincount(inverse, minlength=edges.shape[0])
        if counts.max(initial=0) > 2:
            raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_tris[:, 0] = owner[order][starts]
        two = counts == 2
        edge_tris[two, 1] = owner[order][starts[two] + 1]

        d = vertices[edges[:, 1]] - vertices[edges[:, 0]]
        lengths = np.hypot(d[:, 0], d[:, 1])
        normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
        # flip so the normal leaves the first adjacent triangle
        first = edge_tris[:, 0]
        opposite = np.empty(edges.shape[0], dtype=np.int64)
        for i in range(3):
            sel = tri_edges[first, i] == np.arange(edges.shape[0])
            opposite[sel] = triangles[first[sel], i]
        inward = vertices[opposite] - vertices[edges[:, 0]]
        flip = np.einsum("ij,ij->i", normals, inward) > 0
        normals[flip] *= -1

        P = vertices[triangles]
        sides = np.stack(
            [np.linalg.norm(P[:, 2] - P[:, 1], axis=1),
             np.linalg.norm(P[:, 0] - P[:, 2], axis=1),
             np.linalg.norm(P[:, 1] - P[:, 0], axis=1)],
            axis=1,
        )
        return cls(vertices, triangles, edges, tri_edges, edge_tris, lengths, normals, sides.max(axis=1))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def h(self) -> float:
        return float(self.tri_diameters.max())

    @property
    def is_boundary(self) -> np.ndarray:
        return self.edge_tris[:, 1] < 0

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    def signed_areas(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        a = P[:, 1] - P[:, 0]
        b = P[:, 2] - P[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)


def structured_unit_square(n: int) -> Mesh:
    """n x n grid of squares, each split along the lower-left to upper-right diagonal."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (j * (n + 1) + i).ravel()
    b, c, d = a + 1, a + n + 2, a + n + 1
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])
    return Mesh.from_arrays(vertices, tris)


def uniform_refine(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle is split into four through its edge midpoints."""
    nv = mesh.n_vertices
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints()])
    p = mesh.triangles
    m = mesh.tri_edges + nv  # m[:, i] is the midpoint opposite vertex i
    children = np.stack(
        [
            np.column_stack([p[:, 0], m[:, 2], m[:, 1]]),
            np.column_stack([m[:, 2], p[:, 1], m[:, 0]]),
            np.column_stack([m[:, 1], m[:, 0], p[:, 2]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Mesh.from_arrays(vertices, children)


def _on_square_boundary(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    return (
        (np.abs(x) < BOUNDARY_TOL)
        | (np.abs(x - 1) < BOUNDARY_TOL)
        | (np.abs(y) < BOUNDARY_TOL)
        | (np.abs(y - 1) < BOUNDARY_TOL)
    )


def validate(mesh: Mesh) -> list[str]:
    """Return a list of problems found; empty when the mesh is valid."""
    problems = []
    areas = mesh.signed_areas()
    for K in np.flatnonzero(areas <= 0):
        problems.append(f"orientation: triangle {K} has signed area {areas[K]:.3e}")

    for e in range(mesh.n_edges):
        adj = [K for K in mesh.edge_tris[e] if K >= 0]
        if not adj:
            problems.append(f"adjacency: edge {e} has no adjacent triangle")
        for K in adj:
            if K >= mesh.n_triangles or e not in mesh.tri_edges[K]:
                problems.append(f"adjacency: edge {e} lists triangle {K}, which does not reference it")
            elif set(mesh.edges[e]) - set(mesh.triangles[K]):
                problems.append(f"adjacency: edge {e} vertices are not vertices of triangle {K}")
    for K in range(mesh.n_triangles):
        for e in mesh.tri_edges[K]:
            if e >= mesh.n_edges or K not in mesh.edge_tris[e]:
                problems.append(f"adjacency: triangle {K} lists edge {e}, which does not list it back")

    euler = mesh.n_vertices - mesh.n_edges + mesh.n_triangles
    if euler != 1:
        problems.append(f"euler: V - E + T = {euler}, expected 1")

    bnd = np.flatnonzero(mesh.is_boundary)
    ends = mesh.vertices[mesh.edges[bnd]]
    mids = ends.mean(axis=1)
    same_side = np.zeros(len(bnd), dtype=bool)
    for axis in (0, 1):
        for val in (0.0, 1.0):
            same_side |= np.all(np.abs(ends[:, :, axis] - val) < BOUNDARY_TOL, axis=1)
    for e in bnd[~(same_side & _on_square_boundary(mids))]:
        problems.append(f"boundary: edge {e} lies off the boundary of the unit square")
    return problems


def read_mesh(path: str | Path) -> Mesh:
    """Read the plain-text format: ``V T``, V lines ``x y``, T lines ``i j k``."""
    tokens = Path(path).read_text().split()
    nv, nt = int(tokens[0]), int(tokens[1])
    vals = tokens[2:]
    if len(vals) != 2 * nv + 3 * nt:
        raise ValueError(f"{path}: expected {2 * nv + 3 * nt} values after the header, got {len(vals)}")
    vertices = np.array(vals[: 2 * nv], dtype=float).reshape(nv, 2)
    tris = np.array(vals[2 * nv:], dtype=np.int64).reshape(nt, 3)
    if tris.size and (tris.min() < 0 or tris.max() >= nv):
        raise ValueError(f"{path}: triangle vertex index out of range")
    return Mesh.from_arrays(vertices, tris)


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines += [" ".join(map(str, t)) for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")
