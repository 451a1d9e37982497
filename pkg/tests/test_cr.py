import numpy as np
import pytest

from rhdg.cr import (
    L0_VALUE,
    compare_with_hdg,
    cr_divergence_residual,
    cr_interpolate,
    cr_velocity_block,
    hdg_cr_differences,
    solve_cr,
)
from rhdg.exact import polynomial_solution, trigonometric_solution
from rhdg.hdg import SpaceSpec, assemble, solve_full
from rhdg.mesh import structured_unit_square


def test_cr_block_symmetric_positive_definite():
    S = cr_velocity_block(structured_unit_square(3)).toarray()
    assert np.allclose(S, S.T)
    assert np.linalg.eigvalsh(S).min() > 0


def test_cr_reproduces_linear_solution():
    ex = polynomial_solution(0)
    mesh = structured_unit_square(3)
    cr = solve_cr(mesh, ex.f, ex.u)
    assert np.allclose(cr.velocity, ex.u(mesh.edge_midpoints()), atol=1e-12)
    assert np.abs(cr.pressure).max() < 1e-12


def test_cr_discretely_divergence_free():
    mesh = structured_unit_square(4)
    cr = solve_cr(mesh, trigonometric_solution().f)
    assert cr_divergence_residual(cr) < 1e-12
    assert abs(np.sum(cr.pressure) / mesh.n_triangles) < 1e-12


def test_cr_interpolate_is_edge_mean():
    mesh = structured_unit_square(2)
    coeffs = np.zeros((mesh.n_edges, 2, 1))
    coeffs[:, 0, 0] = 3.0
    assert np.allclose(cr_interpolate(coeffs, mesh)[:, 0], 3.0 * L0_VALUE)
    with pytest.raises(ValueError):
        cr_interpolate(np.zeros((mesh.n_edges, 2, 2)), mesh, k=1)


@pytest.mark.parametrize("tau", [10.0, 1000.0])
def test_hdg_k0_equals_cr(tau):
    ex = trigonometric_solution()
    mesh = structured_unit_square(4)
    spec = SpaceSpec(0, tau=tau)
    hdg = solve_full(assemble(mesh, spec, ex.f))
    cr = solve_cr(mesh, ex.f, load_degree=spec.load_degree)
    d = compare_with_hdg(hdg, cr)
    assert d.midpoint_velocity <= 1e-8 and d.pressure <= 1e-8
    h1, l2p = hdg_cr_differences(hdg, cr)
    assert l2p <= 1e-8
    assert h1 > 0  # element velocities differ from the CR field at finite tau


def test_compare_rejects_other_mesh_or_k():
    ex = trigonometric_solution()
    cr = solve_cr(structured_unit_square(2), ex.f)
    hdg = solve_full(assemble(structured_unit_square(3), SpaceSpec(0), ex.f))
    with pytest.raises(ValueError):
        compare_with_hdg(hdg, cr)
    hdg1 = solve_full(assemble(structured_unit_square(2), SpaceSpec(1), ex.f))
    with pytest.raises(ValueError):
        compare_with_hdg(hdg1, cr)
