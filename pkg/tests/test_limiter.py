"""Tests for the positivity-preserving scaling limiter."""
import numpy as np
import pytest

from errors import NegativeCellAverageError
from fem import BoundaryKind, DGFunction, Mesh1D, l2_norm
from limiter import LimiterConfig, apply_positivity, check_point_values


@pytest.fixture
def mesh():
    return Mesh1D.uniform(-1.0, 1.0, 20, BoundaryKind.DIRICHLET)


def test_check_points_include_cell_ends():
    points = LimiterConfig().check_points()
    assert points.size == 12
    assert points[0] == -1.0 and points[-1] == 1.0


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("trial", range(10))
def test_limited_solution_is_nonnegative(mesh, k, trial):
    rng = np.random.default_rng(trial)
    coeffs = rng.standard_normal((mesh.n_cells, k + 1))
    coeffs[:, 0] = np.abs(coeffs[:, 0]) + 1e-3
    u = DGFunction(mesh, k, coeffs)
    cfg = LimiterConfig()
    limited = apply_positivity(u, cfg)
    assert check_point_values(limited, cfg).min() >= -1e-14
    assert np.array_equal(limited.averages, u.averages)


def test_untouched_when_already_positive(mesh):
    u = DGFunction(mesh, 2, np.tile([1.0, 0.2, 0.1], (mesh.n_cells, 1)))
    assert apply_positivity(u) is u


def test_zero_average_cell_is_flattened(mesh):
    coeffs = np.tile([1.0, 0.0], (mesh.n_cells, 1))
    coeffs[3] = [0.0, 0.5]
    limited = apply_positivity(DGFunction(mesh, 1, coeffs))
    assert limited.coeffs[3] == pytest.approx([0.0, 0.0])
    assert limited.coeffs[4] == pytest.approx([1.0, 0.0])


def test_negative_average_raises(mesh):
    coeffs = np.tile([1.0, 0.0], (mesh.n_cells, 1))
    coeffs[7, 0] = -1e-3
    with pytest.raises(NegativeCellAverageError) as excinfo:
        apply_positivity(DGFunction(mesh, 1, coeffs))
    assert excinfo.value.cell == 7


@pytest.mark.parametrize("k", [0, 2])
def test_round_off_undershoot_is_flattened_to_vacuum(mesh, k):
    coeffs = np.zeros((mesh.n_cells, k + 1))
    coeffs[:, 0] = 1.5
    coeffs[2, 0] = -1.2e-6
    coeffs[5, 0] = -1e-14
    if k:
        coeffs[[2, 5], 1] = 1e-3
    limited = apply_positivity(DGFunction(mesh, k, coeffs))
    assert not np.any(limited.coeffs[2])
    assert not np.any(limited.coeffs[5])
    assert np.array_equal(limited.coeffs[0], coeffs[0])


def test_negative_average_raises_for_piecewise_constants(mesh):
    coeffs = np.full((mesh.n_cells, 1), 0.3)
    coeffs[4, 0] = -0.1
    with pytest.raises(NegativeCellAverageError) as excinfo:
        apply_positivity(DGFunction(mesh, 0, coeffs))
    assert excinfo.value.cell == 4


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("trial", range(5))
def test_limiter_is_idempotent_and_does_not_grow_the_norm(mesh, k, trial):
    rng = np.random.default_rng(100 + trial)
    coeffs = rng.standard_normal((mesh.n_cells, k + 1))
    coeffs[:, 0] = np.abs(coeffs[:, 0]) + 1e-3
    u = DGFunction(mesh, k, coeffs)
    once = apply_positivity(u)
    twice = apply_positivity(once)
    assert np.array_equal(twice.coeffs, once.coeffs)
    assert l2_norm(once) <= l2_norm(u)


def test_floor_is_respected(mesh):
    coeffs = np.tile([0.5, 0.4], (mesh.n_cells, 1))
    cfg = LimiterConfig(floor=0.2)
    limited = apply_positivity(DGFunction(mesh, 1, coeffs), cfg)
    assert check_point_values(limited, cfg).min() == pytest.approx(0.2)
    assert limited.coeffs[:, 1] == pytest.approx(np.full(mesh.n_cells, 0.3))


def test_disabled_limiter_and_piecewise_constants_pass_through(mesh):
    coeffs = np.tile([0.1, -0.5], (mesh.n_cells, 1))
    u = DGFunction(mesh, 1, coeffs)
    assert apply_positivity(u, LimiterConfig(enabled=False)) is u
    constant = DGFunction(mesh, 0, np.full((mesh.n_cells, 1), 0.3))
    assert apply_positivity(constant) is constant
