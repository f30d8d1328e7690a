"""Tests for the LDG operators and the assembled discrete Laplacian."""
import numpy as np
import pytest

from errors import ConfigurationError
from fem import BoundaryKind, DGFunction, DirichletData, Mesh1D, Side, gauss_radau_project, l2_error, l2_project
from ldg import (
    ConvectionFlux,
    FluxSet,
    SampledDiffusion,
    SolutionDiffusion,
    SpatialDiffusion,
    antiderivative,
    assemble_discrete_laplacian,
    jump_ratio_flux,
    lax_friedrichs_bound,
    minus_traces,
    op_convection,
    op_K,
    op_L,
    op_Ktilde,
    op_Ltilde,
    plus_traces,
)


def inner(u, v):
    weights = u.mesh.widths[:, None] / (2.0 * np.arange(u.degree + 1) + 1.0)[None, :]
    return float(np.sum(weights * u.coeffs * v.coeffs))


def test_only_alternating_pairing_is_accepted():
    with pytest.raises(ConfigurationError):
        FluxSet(Side.PLUS, Side.MINUS)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("trial", range(10))
def test_discrete_duality(k, trial, periodic_mesh):
    rng = np.random.default_rng(trial)
    u = DGFunction(periodic_mesh, k, rng.standard_normal((periodic_mesh.n_cells, k + 1)))
    q = DGFunction(periodic_mesh, k, rng.standard_normal((periodic_mesh.n_cells, k + 1)))
    left, right = inner(op_K(u), q), -inner(u, op_L(q))
    assert left == pytest.approx(right, abs=1e-12 * max(1.0, abs(left)))


def test_op_K_differentiates_continuous_linear_data():
    mesh = Mesh1D.uniform(0.0, 1.0, 6, BoundaryKind.DIRICHLET, DirichletData(1.0, 3.0))
    u = l2_project(lambda x: 1.0 + 2.0 * x, mesh, 1)
    q = op_K(u)
    assert q.coeffs[:, 0] == pytest.approx(np.full(6, 2.0), abs=1e-12)
    assert q.coeffs[:, 1] == pytest.approx(np.zeros(6), abs=1e-12)


def test_op_L_differentiates_continuous_quadratic():
    mesh = Mesh1D.uniform(0.0, 1.0, 5, BoundaryKind.DIRICHLET)
    q = l2_project(lambda x: x**2, mesh, 2)
    derivative = op_L(q)
    x = np.linspace(0.01, 0.99, 21)
    assert derivative.evaluate(x) == pytest.approx(2.0 * x, abs=1e-11)


@pytest.mark.parametrize("k", [1, 2])
def test_op_K_converges_on_smooth_periodic_data(k):
    errors = []
    for n in (20, 40):
        mesh = Mesh1D.uniform(-np.pi, np.pi, n)
        q = op_K(gauss_radau_project(np.sin, mesh, k, Side.MINUS))
        errors.append(l2_error(q, lambda x, t: np.cos(x), 0.0))
    assert errors[1] < errors[0] / 2.0 ** (k + 0.5)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("boundary", [BoundaryKind.PERIODIC, BoundaryKind.DIRICHLET])
def test_assembled_laplacian_matches_matrix_free(k, boundary, rng):
    mesh = Mesh1D.uniform(0.0, 2.0, 9, boundary, DirichletData(0.4, -1.1) if boundary == "dirichlet" else None)
    laplacian = assemble_discrete_laplacian(mesh, k)
    for _ in range(5):
        u = DGFunction(mesh, k, rng.standard_normal((9, k + 1)))
        expected = op_L(op_K(u, 0.3)).vector()
        assert laplacian.apply(u, 0.3).vector() == pytest.approx(expected, rel=1e-12, abs=1e-10)


def test_boundary_term_vanishes_on_periodic_mesh(periodic_mesh):
    laplacian = assemble_discrete_laplacian(periodic_mesh, 2)
    assert not np.any(laplacian.boundary_term(1.0))
    assert laplacian.size == periodic_mesh.n_cells * 3


def test_laplacian_annihilates_constants_on_periodic_mesh(periodic_mesh):
    laplacian = assemble_discrete_laplacian(periodic_mesh, 2)
    constant = np.tile([1.0, 0.0, 0.0], periodic_mesh.n_cells)
    assert laplacian.matrix @ constant == pytest.approx(np.zeros(laplacian.size), abs=1e-10)


def test_constant_solution_diffusion_equals_scaled_laplacian(periodic_mesh, random_function):
    a = 0.5
    diffusion = SolutionDiffusion(a=lambda u: np.full_like(np.asarray(u, dtype=float), a))
    u = random_function(periodic_mesh, 2)
    expected = op_L(op_K(u)).coeffs * a
    assert diffusion.apply(u).coeffs == pytest.approx(expected, rel=1e-9, abs=1e-9)
    assert diffusion.max_coefficient(u) == pytest.approx(a)


def test_constant_sampled_diffusion_equals_scaled_laplacian(periodic_mesh, random_function):
    diffusion = SpatialDiffusion(lambda x: np.full_like(x, 2.0))
    u = random_function(periodic_mesh, 1)
    expected = op_L(op_K(u)).coeffs * 2.0
    assert diffusion.apply(u).coeffs == pytest.approx(expected, rel=1e-10, abs=1e-10)
    assert diffusion.on(periodic_mesh) is diffusion.on(periodic_mesh)


def test_sampled_diffusion_rejects_negative_coefficient(periodic_mesh):
    with pytest.raises(ConfigurationError):
        SampledDiffusion.from_function(lambda x: np.sin(x), periodic_mesh)


def test_sampled_diffusion_refuses_other_mesh(periodic_mesh):
    diffusion = SampledDiffusion.from_function(lambda x: 1.0 + x**2, periodic_mesh)
    other = Mesh1D.uniform(-np.pi, np.pi, periodic_mesh.n_cells + 1)
    with pytest.raises(ConfigurationError):
        diffusion.apply(DGFunction.zeros(other, 1))


def test_antiderivative_by_quadrature():
    B = antiderivative(lambda s: 1.0 + s)
    u = np.array([-2.0, 0.0, 0.5, 3.0])
    assert B(u) == pytest.approx(u + 0.5 * u**2, abs=1e-14)


def test_jump_ratio_flux_difference_quotient():
    b, B = (lambda s: 1.0 + s), (lambda s: s + 0.5 * s**2)
    value = jump_ratio_flux(np.array([0.0]), np.array([2.0]), b, B)
    assert value == pytest.approx([2.0])


def test_jump_ratio_flux_uses_mean_for_small_jumps():
    b, B = (lambda s: 1.0 + s), (lambda s: s + 0.5 * s**2)
    value = jump_ratio_flux(1.0, 1.0 + 1e-14, b, B)
    assert value == pytest.approx(2.0, abs=1e-13)
    small = jump_ratio_flux(np.array([0.3]), np.array([0.3 + 1e-5]), b, B)
    assert small == pytest.approx([1.3 + 0.5e-5], abs=1e-15)


def test_constant_coefficient_flux_is_exact_on_smooth_data():
    # traces of a smooth projection jump by O(h^3); b-hat must stay sqrt(a)
    a = 0.5
    mesh = Mesh1D.uniform(-np.pi, np.pi, 320)
    u = gauss_radau_project(np.sin, mesh, 2)
    b = lambda s: np.full_like(np.asarray(s, dtype=float), np.sqrt(a))
    b_hat = jump_ratio_flux(minus_traces(u), plus_traces(u), b, antiderivative(b))
    assert np.abs(b_hat - np.sqrt(a)).max() < 1e-14
    diffusion = SolutionDiffusion(a=lambda s: np.full_like(np.asarray(s, dtype=float), a))
    expected = op_L(op_K(u)).coeffs * a
    assert np.abs(diffusion.apply(u).coeffs - expected).max() < 1e-9


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("trial", range(5))
def test_nonlinear_operators_dissipate_exactly(k, trial, periodic_mesh):
    # (L~(u, p), u) = -(p, p) with p = K~(B(u)) for a = u^2 + 1
    rng = np.random.default_rng(trial)
    u = DGFunction(periodic_mesh, k, 0.01 * rng.standard_normal((periodic_mesh.n_cells, k + 1)))
    b = lambda s: np.sqrt(np.asarray(s, dtype=float) ** 2 + 1.0)
    B = lambda s: 0.5 * (np.asarray(s, dtype=float) * b(s) + np.arcsinh(s))
    p = op_Ktilde(u, B)
    left, right = inner(op_Ltilde(u, p, b, B), u), -inner(p, p)
    assert left == pytest.approx(right, rel=1e-10)


def test_op_Ktilde_reduces_to_scaled_op_K(periodic_mesh, random_function):
    u = random_function(periodic_mesh, 2)
    p = op_Ktilde(u, lambda s: 3.0 * s)
    assert p.coeffs == pytest.approx(3.0 * op_K(u).coeffs, rel=1e-11, abs=1e-11)


def test_nonlinear_diffusion_converges():
    # (a(u) u_x)_x with a = u^2 + 1 and u = sin x
    diffusion = SolutionDiffusion(a=lambda u: u**2 + 1.0)
    exact = lambda x, t: (np.sin(x) ** 2 + 1.0) * -np.sin(x) + 2.0 * np.sin(x) * np.cos(x) ** 2
    errors = []
    for n in (20, 40):
        mesh = Mesh1D.uniform(-np.pi, np.pi, n)
        errors.append(l2_error(diffusion.apply(gauss_radau_project(np.sin, mesh, 2)), exact, 0.0))
    assert errors[1] < errors[0] / 3.0


def test_convection_with_upwind_bound_approximates_derivative():
    flux = ConvectionFlux(lambda n, x: n, lambda n, x: np.ones_like(n))
    errors = []
    for n in (20, 40):
        mesh = Mesh1D.uniform(-np.pi, np.pi, n)
        u = l2_project(np.sin, mesh, 2)
        assert lax_friedrichs_bound(u, flux) == pytest.approx(1.0)
        errors.append(l2_error(op_convection(u, flux), lambda x, t: np.cos(x), 0.0))
    assert errors[1] < min(errors[0] / 3.0, 1e-2)


def test_flux_slope_by_finite_difference():
    flux = ConvectionFlux(lambda n, x: n**2)
    n = np.array([-1.0, 0.5, 2.0])
    assert flux.slope(n, np.zeros(3)) == pytest.approx(2.0 * n, rel=1e-6)
