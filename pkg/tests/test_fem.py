"""Tests for the mesh, Legendre basis, projections and norms."""
import numpy as np
import pytest

from errors import BoundaryTraceError, ConfigurationError, MeshMismatchError
from fem import (
    BoundaryKind,
    DGFunction,
    DirichletData,
    Mesh1D,
    Side,
    gauss_quadrature,
    gauss_radau_project,
    jump,
    l1_diff,
    l2_error,
    l2_norm,
    l2_project,
    legendre_eval,
    legendre_table,
    mode_signs,
    reference_element,
    reference_mass,
    sample_points,
    stiffness_matrix,
    total_mass,
    trace,
)


def test_mesh_rejects_unsorted_edges():
    with pytest.raises(ConfigurationError):
        Mesh1D(np.array([0.0, 0.5, 0.4, 1.0]))


def test_uniform_mesh_geometry():
    mesh = Mesh1D.uniform(-1.0, 1.0, 4)
    assert mesh.n_cells == 4
    assert mesh.h == pytest.approx(0.5)
    assert mesh.centers == pytest.approx([-0.75, -0.25, 0.25, 0.75])
    assert mesh.is_periodic


def test_dirichlet_mesh_gets_zero_data_by_default():
    mesh = Mesh1D.uniform(0.0, 1.0, 3, BoundaryKind.DIRICHLET)
    assert mesh.boundary_values(0.7) == (0.0, 0.0)


def test_dirichlet_data_accepts_callables():
    data = DirichletData(left=lambda t: 2.0 * t, right=1.5)
    assert data.values(0.25) == (0.5, 1.5)


@pytest.mark.parametrize("n_points", [1, 2, 5, 10])
def test_gauss_rule_exact_to_degree_2n_minus_1(n_points):
    rule = gauss_quadrature(n_points)
    degree = 2 * n_points - 1
    exact = 2.0 / (degree + 1) if degree % 2 == 0 else 0.0
    assert rule.nodes**degree @ rule.weights == pytest.approx(exact, abs=1e-14)
    even = degree - 1
    assert rule.nodes**even @ rule.weights == pytest.approx(2.0 / (even + 1), abs=1e-14)


@pytest.mark.parametrize("n_points", [0, 21])
def test_gauss_rule_rejects_bad_sizes(n_points):
    with pytest.raises(ConfigurationError):
        gauss_quadrature(n_points)


def test_legendre_values_at_endpoints():
    for m in range(6):
        assert legendre_eval(m, 1.0) == pytest.approx(1.0)
        assert legendre_eval(m, -1.0) == pytest.approx((-1.0) ** m)
    table = legendre_table(5, np.array([1.0, -1.0]))
    assert table[0] == pytest.approx(np.ones(6))
    assert table[1] == pytest.approx(mode_signs(5))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_reference_mass_matches_quadrature(k):
    rule = gauss_quadrature(k + 1)
    values = legendre_table(k, rule.nodes)
    mass = (values * rule.weights[:, None]).T @ values
    assert mass == pytest.approx(np.diag(reference_mass(k)), abs=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_stiffness_integration_by_parts(k):
    # S + S^T = P(1) P(1)^T - P(-1) P(-1)^T
    S = stiffness_matrix(k)
    e, s = np.ones(k + 1), mode_signs(k)
    assert S + S.T == pytest.approx(np.outer(e, e) - np.outer(s, s), abs=1e-13)


POLYNOMIALS = {
    0: lambda x: np.full_like(x, 3.0),
    1: lambda x: 1.0 + 0.5 * x,
    2: lambda x: 1.0 + 0.5 * x + 0.25 * x**2,
}


@pytest.mark.parametrize("k", [0, 1, 2])
def test_l2_projection_reproduces_polynomials(k):
    mesh = Mesh1D.uniform(0.0, 2.0, 5)
    poly = POLYNOMIALS[k]
    u = l2_project(poly, mesh, k)
    x = np.linspace(0.05, 1.95, 17)
    assert u.evaluate(x) == pytest.approx(poly(x), abs=1e-13)


def test_cell_average_is_first_coefficient():
    mesh = Mesh1D.uniform(0.0, 1.0, 4)
    u = l2_project(lambda x: x**2, mesh, 2)
    edges = mesh.cell_edges
    exact = (edges[1:] ** 3 - edges[:-1] ** 3) / (3.0 * mesh.widths)
    assert u.averages == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_gauss_radau_minus_collocates_right_end(k):
    mesh = Mesh1D.uniform(-np.pi, np.pi, 8)
    u = gauss_radau_project(np.sin, mesh, k, Side.MINUS)
    assert u.right_traces() == pytest.approx(np.sin(mesh.cell_edges[1:]), abs=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_gauss_radau_plus_collocates_left_end(k):
    mesh = Mesh1D.uniform(-np.pi, np.pi, 8)
    u = gauss_radau_project(np.cos, mesh, k, Side.PLUS)
    assert u.left_traces() == pytest.approx(np.cos(mesh.cell_edges[:-1]), abs=1e-14)


@pytest.mark.parametrize("k", [1, 2])
def test_gauss_radau_keeps_lower_moments(k):
    mesh = Mesh1D.uniform(-np.pi, np.pi, 8)
    radau = gauss_radau_project(np.sin, mesh, k, Side.MINUS)
    l2 = l2_project(np.sin, mesh, k)
    assert radau.coeffs[:, :k] == pytest.approx(l2.coeffs[:, :k], abs=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("side", [Side.MINUS, Side.PLUS])
def test_gauss_radau_projection_order(k, side):
    errors = []
    for n in (16, 32, 64, 128):
        mesh = Mesh1D.uniform(-np.pi, np.pi, n)
        u = gauss_radau_project(np.sin, mesh, k, side)
        errors.append(l2_error(u, lambda x, t: np.sin(x), 0.0))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert ratios == pytest.approx(np.full(3, 2.0 ** (k + 1)), rel=0.1)


def test_traces_and_jumps_periodic():
    mesh = Mesh1D.uniform(0.0, 1.0, 4)
    u = DGFunction(mesh, 1, np.array([[1.0, 0.5], [2.0, 0.0], [0.0, 1.0], [1.0, -1.0]]))
    assert trace(u, 1, Side.MINUS) == pytest.approx(1.5)
    assert trace(u, 1, Side.PLUS) == pytest.approx(2.0)
    assert jump(u, 1) == pytest.approx(0.5)
    # interface 0 wraps to the last cell
    assert trace(u, 0, Side.MINUS) == pytest.approx(0.0)
    assert trace(u, 4, Side.PLUS) == pytest.approx(0.5)


def test_outside_trace_on_dirichlet_mesh_raises(dirichlet_mesh):
    u = DGFunction.zeros(dirichlet_mesh, 1)
    with pytest.raises(BoundaryTraceError):
        trace(u, 0, Side.MINUS)
    with pytest.raises(BoundaryTraceError):
        trace(u, dirichlet_mesh.n_cells, Side.PLUS)


def test_arithmetic_needs_same_mesh(periodic_mesh, dirichlet_mesh):
    u = DGFunction.zeros(periodic_mesh, 1)
    v = DGFunction.zeros(dirichlet_mesh, 1)
    with pytest.raises(MeshMismatchError):
        u + v
    with pytest.raises(MeshMismatchError):
        u - DGFunction.zeros(periodic_mesh, 2)


def test_vector_round_trip(periodic_mesh, random_function):
    u = random_function(periodic_mesh, 2)
    back = DGFunction.from_vector(periodic_mesh, 2, u.vector())
    assert np.array_equal(back.coeffs, u.coeffs)


def test_l2_norm_matches_quadrature(periodic_mesh, random_function):
    u = random_function(periodic_mesh, 2)
    assert l2_norm(u) == pytest.approx(l2_error(u, lambda x, t: np.zeros_like(x), 0.0), rel=1e-12)


def test_total_mass_and_l1_diff():
    mesh = Mesh1D.uniform(0.0, 2.0, 10)
    u = l2_project(lambda x: x, mesh, 1)
    assert total_mass(u) == pytest.approx(2.0)
    v = u + DGFunction(mesh, 1, np.tile([0.5, 0.0], (10, 1)))
    assert l1_diff(v, u) == pytest.approx(1.0)


def test_sample_points_layout():
    mesh = Mesh1D.uniform(0.0, 1.0, 5)
    u = l2_project(lambda x: 2.0 * x, mesh, 1)
    x, values = sample_points(u, 3)
    assert x.shape == (15,)
    assert x[:3] == pytest.approx([0.0, 0.1, 0.2])
    assert values == pytest.approx(2.0 * x, abs=1e-13)
    with pytest.raises(ConfigurationError):
        sample_points(u, 0)


def test_reference_element_projection_inverts_values():
    ref = reference_element(3)
    assert ref.values.T @ ref.projection == pytest.approx(np.eye(4), abs=1e-13)
