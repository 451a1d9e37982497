"""Manufactured Stokes solutions with the load derived symbolically."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy

X, Y = sympy.symbols("x y", real=True)

Field = Callable[[np.ndarray], np.ndarray]


def _vectorize(expr, shape: tuple[int, ...]) -> Field:
    flat = list(sympy.Array(expr).reshape(int(np.prod(shape))) if shape else [expr])
    fns = [sympy.lambdify((X, Y), e, "numpy") for e in flat]

    def evaluate(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        vals = [np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape) for f in fns]
        return np.stack(vals, axis=-1).reshape(x.shape + shape)

    return evaluate


@dataclass(frozen=True)
class ExactSolution:
    """Evaluators for (u, grad u, Hess u, lap u, p, grad p, f) at points of shape (..., 2).

    ``grad_u[..., c, d]`` is d u_c / d x_d; ``f = -lap u + grad p``.
    """

    u: Field
    grad_u: Field
    hess_u: Field
    lap_u: Field
    p: Field
    grad_p: Field
    f: Field
    smoothness: str
    name: str = ""

    @classmethod
    def from_sympy(cls, u_expr, p_expr, smoothness: str = "polynomial", name: str = "") -> "ExactSolution":
        u_expr = [sympy.sympify(c) for c in u_expr]
        p_expr = sympy.sympify(p_expr)
        grad = [[sympy.diff(c, v) for v in (X, Y)] for c in u_expr]
        hess = [[[sympy.diff(c, a, b) for b in (X, Y)] for a in (X, Y)] for c in u_expr]
        lap = [sympy.diff(c, X, 2) + sympy.diff(c, Y, 2) for c in u_expr]
        gp = [sympy.diff(p_expr, v) for v in (X, Y)]
        f = [sympy.simplify(-lap[i] + gp[i]) for i in range(2)]
        return cls(
            u=_vectorize(u_expr, (2,)),
            grad_u=_vectorize(grad, (2, 2)),
            hess_u=_vectorize(hess, (2, 2, 2)),
            lap_u=_vectorize(lap, (2,)),
            p=_vectorize(p_expr, ()),
            grad_p=_vectorize(gp, (2,)),
            f=_vectorize(f, (2,)),
            smoothness=smoothness,
            name=name,
        )

    @classmethod
    def from_stream_function(cls, psi, p_expr, smoothness: str = "polynomial", name: str = "") -> "ExactSolution":
        psi = sympy.sympify(psi)
        return cls.from_sympy([sympy.diff(psi, Y), -sympy.diff(psi, X)], p_expr, smoothness, name)

    def divergence(self, pts: np.ndarray) -> np.ndarray:
        g = self.grad_u(pts)
        return g[..., 0, 0] + g[..., 1, 1]


def trigonometric_solution() -> ExactSolution:
    """Divergence-free test case on the unit square.

    Velocity from the stream function sin^2(pi x) sin^2(pi y), which vanishes
    with its normal derivative on the boundary; p = 4 pi sin(2 pi x) sin(2 pi y).
    """
    pi = sympy.pi
    psi = sympy.sin(pi * X) ** 2 * sympy.sin(pi * Y) ** 2
    p = 4 * pi * sympy.sin(2 * pi * X) * sympy.sin(2 * pi * Y)
    return ExactSolution.from_stream_function(psi, p, smoothness="analytic", name="trigonometric")


def polynomial_solution(k: int) -> ExactSolution:
    """Divergence-free u in [P_{k+1}]^2 with mean-zero p in P_k (inhomogeneous boundary data)."""
    if k == 0:
        return ExactSolution.from_sympy([Y + 2 * X, X - 2 * Y + 1], 0, name="poly-k0")
    if k == 1:
        psi = X**2 * Y + 2 * X * Y**2 - Y**3 + X * Y
        return ExactSolution.from_stream_function(psi, 3 * X - 2 * Y - sympy.Rational(1, 2), name="poly-k1")
    if k == 2:
        psi = X**3 * Y - 2 * X * Y**3 + X**2 * Y**2 + Y**4 / 2 + X**3
        p = X**2 - 3 * X * Y + Y**2 - X + sympy.Rational(7, 12)
        return ExactSolution.from_stream_function(psi, p, name="poly-k2")
    raise ValueError(f"no polynomial solution for k={k}")


def zero_solution() -> ExactSolution:
    return ExactSolution.from_sympy([0, 0], 0, name="zero")
