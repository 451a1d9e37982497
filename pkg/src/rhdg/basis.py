"""Reference-element quadrature and orthonormal polynomial bases.

The reference triangle is the unit simplex with vertices (0, 0), (1, 0) and
(0, 1).  Edges are parameterized by ``t`` in [-1, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

MAX_TRI_DEGREE = 20
MAX_EDGE_POINTS = 20


@dataclass(frozen=True)
class TriQuadRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,), sum 1/2
    exactness_degree: int

    @property
    def xy(self) -> np.ndarray:
        """Cartesian reference coordinates, shape (nq, 2)."""
        return self.points[:, 1:]


@dataclass(frozen=True)
class EdgeQuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


def tri_quadrature(required_degree: int) -> TriQuadRule:
    """Collapsed (Duffy) Gauss-Jacobi x Gauss-Legendre rule on the reference triangle.

    All weights are positive and the rule is exact for every polynomial of
    total degree ``2n - 1`` where ``n = required_degree // 2 + 1``.
    """
    if not 0 <= required_degree <= MAX_TRI_DEGREE:
        raise ValueError(f"triangle quadrature degree {required_degree} not in [0, {MAX_TRI_DEGREE}]")
    n = required_degree // 2 + 1
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = legendre.leggauss(n)
    x = (1.0 + tj) / 2.0
    s = (1.0 + tl) / 2.0
    X = np.repeat(x, n)
    Y = (1.0 - X) * np.tile(s, n)
    W = np.outer(wj / 4.0, wl / 2.0).ravel()
    bary = np.column_stack([1.0 - X - Y, X, Y])
    return TriQuadRule(bary, W, 2 * n - 1)


def gauss_legendre_1d(npoints: int) -> EdgeQuadRule:
    if not 1 <= npoints <= MAX_EDGE_POINTS:
        raise ValueError(f"unsupported number of Gauss points: {npoints}")
    t, w = legendre.leggauss(npoints)
    return EdgeQuadRule(t, w, 2 * npoints - 1)


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    """Monomials in the order 1, x, y, x^2, xy, y^2, ..."""
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def _pow(x: np.ndarray, e: int) -> np.ndarray:
    return x**e if e >= 0 else np.zeros_like(x)


class TriBasis:
    """L2-orthonormal basis of P_degree on the reference triangle.

    Obtained by Gram-Schmidt on the monomials, i.e. a Cholesky factorization
    of the exact monomial Gram matrix.
    """

    def __init__(self, degree: int):
        if not 0 <= degree <= 3:
            raise ValueError(f"basis degree {degree} not supported (0..3)")
        self.degree = degree
        self.exponents = monomial_exponents(degree)
        self.dim = len(self.exponents)
        gram = np.array(
            [[monomial_integral(a1 + a2, b1 + b2) for (a2, b2) in self.exponents] for (a1, b1) in self.exponents]
        )
        chol = np.linalg.cholesky(gram)
        # phi = coeffs @ monomials
        self.coeffs = np.linalg.inv(chol)

    def _monomials(self, xy):
        x, y = xy[:, 0], xy[:, 1]
        return np.stack([_pow(x, a) * _pow(y, b) for a, b in self.exponents], axis=1)

    def values(self, xy: np.ndarray) -> np.ndarray:
        """Basis values at reference points, shape (N, dim)."""
        xy = np.atleast_2d(xy)
        return self._monomials(xy) @ self.coeffs.T

    def gradients(self, xy: np.ndarray) -> np.ndarray:
        """Shape (N, dim, 2)."""
        xy = np.atleast_2d(xy)
        x, y = xy[:, 0], xy[:, 1]
        dx = np.stack([a * _pow(x, a - 1) * _pow(y, b) for a, b in self.exponents], axis=1)
        dy = np.stack([b * _pow(x, a) * _pow(y, b - 1) for a, b in self.exponents], axis=1)
        return np.stack([dx @ self.coeffs.T, dy @ self.coeffs.T], axis=2)

    def hessians(self, xy: np.ndarray) -> np.ndarray:
        """Shape (N, dim, 2, 2)."""
        xy = np.atleast_2d(xy)
        x, y = xy[:, 0], xy[:, 1]
        dxx = np.stack([a * (a - 1) * _pow(x, a - 2) * _pow(y, b) for a, b in self.exponents], axis=1)
        dxy = np.stack([a * b * _pow(x, a - 1) * _pow(y, b - 1) for a, b in self.exponents], axis=1)
        dyy = np.stack([b * (b - 1) * _pow(x, a) * _pow(y, b - 2) for a, b in self.exponents], axis=1)
        C = self.coeffs.T
        H = np.empty((xy.shape[0], self.dim, 2, 2))
        H[:, :, 0, 0] = dxx @ C
        H[:, :, 0, 1] = H[:, :, 1, 0] = dxy @ C
        H[:, :, 1, 1] = dyy @ C
        return H


def build_tri_basis(degree: int) -> TriBasis:
    return TriBasis(degree)


class EdgeBasis:
    """Orthonormal Legendre polynomials on [-1, 1]."""

    def __init__(self, degree: int):
        self.degree = degree
        self.dim = degree + 1

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.dim))
        for i in range(self.dim):
            c = np.zeros(i + 1)
            c[i] = 1.0
            out[:, i] = np.sqrt((2 * i + 1) / 2.0) * legendre.legval(t, c)
        return out


def edge_trace_projection(k: int, trace_values: np.ndarray, rule: EdgeQuadRule) -> np.ndarray:
    """L2 projection onto P_k of a function sampled at the rule's points.

    Returns the k+1 coefficients in the orthonormal Legendre basis on [-1, 1].
    Extra trailing axes of ``trace_values`` are carried through.
    """
    if rule.exactness_degree < 2 * k + 2:
        raise ValueError(
            f"edge rule exact to degree {rule.exactness_degree}, projection onto P_{k} needs {2 * k + 2}"
        )
    L = EdgeBasis(k).values(rule.points)
    f = np.asarray(trace_values, dtype=float)
    return np.tensordot(L * rule.weights[:, None], f, axes=(0, 0))


# Reference edge j is opposite vertex j, traversed from _EDGE_VERTS[j][0] to _EDGE_VERTS[j][1].
EDGE_LOCAL_VERTICES = ((1, 2), (2, 0), (0, 1))
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def reference_edge_points(j: int, t: np.ndarray) -> np.ndarray:
    """Reference-triangle points on local edge j at local parameters t."""
    a, b = EDGE_LOCAL_VERTICES[j]
    t = np.asarray(t, dtype=float)[:, None]
    return 0.5 * (1.0 - t) * REF_VERTICES[a] + 0.5 * (1.0 + t) * REF_VERTICES[b]
