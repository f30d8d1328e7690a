"""Tests for the (phi, psi) Poisson solver."""
import numpy as np
import pytest

from errors import ConfigurationError
from fem import DGFunction, Mesh1D, l2_error, l2_project
from poisson import PoissonSystem, solve_poisson


def test_reproduces_quadratic_potential():
    # phi = 1 + x^2 lies in V_h for k = 2
    mesh = Mesh1D.uniform(0.0, 1.0, 5)
    source = l2_project(lambda x: np.full_like(x, 2.0), mesh, 2)
    phi, E = solve_poisson(source, 1.0, 2.0)
    x = np.linspace(0.02, 0.98, 13)
    assert phi.evaluate(x) == pytest.approx(1.0 + x**2, abs=1e-10)
    assert E.evaluate(x) == pytest.approx(-2.0 * x, abs=1e-9)


def test_linear_potential_without_source():
    mesh = Mesh1D.uniform(0.0, 0.6, 8)
    phi, E = solve_poisson(DGFunction.zeros(mesh, 1), 0.4, 1.9)
    x = np.linspace(0.01, 0.59, 9)
    assert phi.evaluate(x) == pytest.approx(0.4 + 2.5 * x, abs=1e-10)
    assert E.coeffs[:, 0] == pytest.approx(np.full(8, -2.5), abs=1e-10)


def test_residual_of_solution_vanishes(rng):
    mesh = Mesh1D.uniform(0.0, 1.0, 12)
    system = PoissonSystem(mesh, 2)
    source = DGFunction(mesh, 2, rng.standard_normal((12, 3)))
    phi, psi = system.solve(source, -0.3, 0.8)
    assert system.residual(phi, psi, source, -0.3, 0.8) < 1e-10
    assert system.matrix.shape == (2 * system.n_unknowns, 2 * system.n_unknowns)


@pytest.mark.parametrize("k", [1, 2])
def test_smooth_potential_converges(k):
    # phi = sin(pi x) + x on (0, 1)
    exact_phi = lambda x, t: np.sin(np.pi * x) + x
    exact_E = lambda x, t: -(np.pi * np.cos(np.pi * x) + 1.0)
    phi_errors, E_errors = [], []
    for n in (10, 20, 40):
        mesh = Mesh1D.uniform(0.0, 1.0, n)
        source = l2_project(lambda x: -np.pi**2 * np.sin(np.pi * x), mesh, k)
        phi, E = solve_poisson(source, 0.0, 1.0)
        phi_errors.append(l2_error(phi, exact_phi, 0.0))
        E_errors.append(l2_error(E, exact_E, 0.0))
    assert phi_errors[2] < phi_errors[1] / 1.8 < phi_errors[0] / 1.8**2
    assert E_errors[2] < E_errors[1] / 1.8 < E_errors[0] / 1.8**2


def test_cached_system_gives_same_answer(rng):
    mesh = Mesh1D.uniform(0.0, 1.0, 6)
    system = PoissonSystem(mesh, 1)
    source = DGFunction(mesh, 1, rng.standard_normal((6, 2)))
    phi_a, E_a = solve_poisson(source, 0.0, 1.0)
    phi_b, E_b = solve_poisson(source, 0.0, 1.0, system=system)
    assert np.allclose(phi_a.coeffs, phi_b.coeffs)
    assert np.allclose(E_a.coeffs, E_b.coeffs)


def test_rejects_source_on_other_mesh():
    system = PoissonSystem(Mesh1D.uniform(0.0, 1.0, 6), 1)
    with pytest.raises(ConfigurationError):
        system.solve(DGFunction.zeros(Mesh1D.uniform(0.0, 1.0, 7), 1), 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        system.solve(DGFunction.zeros(Mesh1D.uniform(0.0, 1.0, 6), 2), 0.0, 0.0)
