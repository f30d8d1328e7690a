"""1D mesh, modal Legendre basis, quadrature, projections and norms.

Every DG quantity in the solver is a `DGFunction`: per-cell coefficients of
the unnormalized Legendre polynomials P_m mapped affinely onto each cell.
With this basis the mass matrix is diagonal, M_j = diag(h_j / (2m + 1)),
and the cell average is coefficient 0.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np

from errors import BoundaryTraceError, ConfigurationError, MeshMismatchError

# Gauss points used for nonlinear integrands and error norms.
NONLINEAR_POINTS = 10
MAX_GAUSS_POINTS = 20

BoundaryValue = Union[float, Callable[[float], float]]


class BoundaryKind(str, Enum):
    """How the two ends of the mesh are closed."""

    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


class Side(str, Enum):
    """One-sided trace selector: MINUS is the left limit, PLUS the right limit."""

    MINUS = "minus"
    PLUS = "plus"


@dataclass(frozen=True)
class DirichletData:
    """Boundary values g_left(t), g_right(t); constants are accepted."""

    left: BoundaryValue = 0.0
    right: BoundaryValue = 0.0

    def values(self, t: float) -> Tuple[float, float]:
        left = self.left(t) if callable(self.left) else self.left
        right = self.right(t) if callable(self.right) else self.right
        return float(left), float(right)


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Partition a = x_{1/2} < ... < x_{N+1/2} = b of the domain."""

    cell_edges: np.ndarray
    boundary: BoundaryKind = BoundaryKind.PERIODIC
    dirichlet: Optional[DirichletData] = None

    def __post_init__(self):
        edges = np.array(self.cell_edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ConfigurationError("a mesh needs at least two cell edges")
        if not np.all(np.diff(edges) > 0.0):
            raise ConfigurationError("cell edges must be strictly increasing")
        edges.flags.writeable = False
        object.__setattr__(self, "cell_edges", edges)
        object.__setattr__(self, "boundary", BoundaryKind(self.boundary))
        if self.boundary == BoundaryKind.DIRICHLET and self.dirichlet is None:
            object.__setattr__(self, "dirichlet", DirichletData())

    @classmethod
    def uniform(
        cls,
        left: float,
        right: float,
        n_cells: int,
        boundary: BoundaryKind = BoundaryKind.PERIODIC,
        dirichlet: Optional[DirichletData] = None,
    ) -> "Mesh1D":
        if n_cells < 1:
            raise ConfigurationError(f"n_cells must be positive, got {n_cells}")
        return cls(np.linspace(left, right, n_cells + 1), boundary, dirichlet)

    @property
    def left(self) -> float:
        return float(self.cell_edges[0])

    @property
    def right(self) -> float:
        return float(self.cell_edges[-1])

    @property
    def n_cells(self) -> int:
        return self.cell_edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.cell_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.cell_edges[1:] + self.cell_edges[:-1])

    @property
    def h(self) -> float:
        """Largest cell width."""
        return float(self.widths.max())

    @property
    def is_periodic(self) -> bool:
        return self.boundary == BoundaryKind.PERIODIC

    def boundary_values(self, t: float = 0.0) -> Tuple[float, float]:
        if self.is_periodic:
            raise BoundaryTraceError("periodic meshes carry no boundary data")
        return self.dirichlet.values(t)

    def physical_points(self, xi: np.ndarray) -> np.ndarray:
        """Map reference points to every cell, shape (N, len(xi))."""
        xi = np.asarray(xi, dtype=float)
        return self.centers[:, None] + 0.5 * self.widths[:, None] * xi[None, :]

    def same_as(self, other: "Mesh1D") -> bool:
        if self is other:
            return True
        return (
            self.boundary == other.boundary
            and self.cell_edges.shape == other.cell_edges.shape
            and np.array_equal(self.cell_edges, other.cell_edges)
        )


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return self.nodes.size


def legendre_eval(m: int, xi):
    """P_m(xi) through the three-term recurrence."""
    if m < 0:
        raise ConfigurationError(f"Legendre degree must be non-negative, got {m}")
    xi = np.asarray(xi, dtype=float)
    p_prev, p = np.ones_like(xi), xi.copy()
    if m == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for n in range(1, m):
        p_prev, p = p, ((2 * n + 1) * xi * p - n * p_prev) / (n + 1)
    return p if p.ndim else float(p)


def legendre_table(k: int, xi) -> np.ndarray:
    """Values P_0..P_k at the points xi, shape xi.shape + (k + 1,)."""
    xi = np.asarray(xi, dtype=float)
    table = np.empty(xi.shape + (k + 1,))
    table[..., 0] = 1.0
    if k >= 1:
        table[..., 1] = xi
    for n in range(1, k):
        table[..., n + 1] = ((2 * n + 1) * xi * table[..., n] - n * table[..., n - 1]) / (n + 1)
    return table


def legendre_derivative_table(k: int, xi) -> np.ndarray:
    """Derivatives P_0'..P_k' at xi, from P'_{n+1} = P'_{n-1} + (2n+1) P_n."""
    xi = np.asarray(xi, dtype=float)
    values = legendre_table(k, xi)
    table = np.zeros(xi.shape + (k + 1,))
    if k >= 1:
        table[..., 1] = 1.0
    for n in range(1, k):
        table[..., n + 1] = table[..., n - 1] + (2 * n + 1) * values[..., n]
    return table


@lru_cache(maxsize=None)
def gauss_quadrature(n_points: int) -> QuadratureRule:
    """Gauss-Legendre nodes and weights, exact for degree 2n - 1."""
    if not isinstance(n_points, (int, np.integer)) or not 1 <= n_points <= MAX_GAUSS_POINTS:
        raise ConfigurationError(
            f"Gauss rule needs 1..{MAX_GAUSS_POINTS} points, got {n_points!r}"
        )
    nodes, weights = np.polynomial.legendre.leggauss(int(n_points))
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(nodes=nodes, weights=weights)


def mode_signs(k: int) -> np.ndarray:
    """P_m(-1) = (-1)^m."""
    return (-1.0) ** np.arange(k + 1)


def reference_mass(k: int) -> np.ndarray:
    """Diagonal of the reference mass matrix, 2 / (2m + 1)."""
    return 2.0 / (2.0 * np.arange(k + 1) + 1.0)


@lru_cache(maxsize=None)
def stiffness_matrix(k: int) -> np.ndarray:
    """S[l, m] = int_{-1}^{1} P_l P_m' dxi (exact)."""
    rule = gauss_quadrature(k + 1)
    values = legendre_table(k, rule.nodes)
    derivatives = legendre_derivative_table(k, rule.nodes)
    stiffness = (values * rule.weights[:, None]).T @ derivatives
    stiffness.flags.writeable = False
    return stiffness


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """Basis tables of degree k sampled at an n-point Gauss rule."""

    degree: int
    rule: QuadratureRule
    values: np.ndarray = field(repr=False)
    derivatives: np.ndarray = field(repr=False)
    weighted_derivatives: np.ndarray = field(repr=False)
    projection: np.ndarray = field(repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes


@lru_cache(maxsize=None)
def reference_element(k: int, n_points: int = NONLINEAR_POINTS) -> ReferenceElement:
    """Cached basis tables; `projection` maps nodal values to modal coefficients."""
    if k < 0:
        raise ConfigurationError(f"polynomial degree must be non-negative, got {k}")
    rule = gauss_quadrature(n_points)
    values = legendre_table(k, rule.nodes)
    derivatives = legendre_derivative_table(k, rule.nodes)
    scale = (2.0 * np.arange(k + 1) + 1.0) / 2.0
    tables = dict(
        values=values,
        derivatives=derivatives,
        weighted_derivatives=rule.weights[:, None] * derivatives,
        projection=rule.weights[:, None] * values * scale[None, :],
    )
    for table in tables.values():
        table.flags.writeable = False
    return ReferenceElement(degree=k, rule=rule, **tables)


@dataclass(eq=False)
class DGFunction:
    """Piecewise polynomial of degree k: coeffs[j, m] multiplies P_m on cell j."""

    mesh: Mesh1D
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.array(self.coeffs, dtype=float)
        expected = (self.mesh.n_cells, self.degree + 1)
        if self.degree < 0 or self.coeffs.shape != expected:
            raise ConfigurationError(
                f"coefficient array has shape {self.coeffs.shape}, expected {expected}"
            )

    @classmethod
    def zeros(cls, mesh: Mesh1D, k: int) -> "DGFunction":
        return cls(mesh, k, np.zeros((mesh.n_cells, k + 1)))

    @classmethod
    def from_vector(cls, mesh: Mesh1D, k: int, vector: np.ndarray) -> "DGFunction":
        return cls(mesh, k, np.asarray(vector, dtype=float).reshape(mesh.n_cells, k + 1))

    def vector(self) -> np.ndarray:
        """Coefficients flattened cell by cell (the layout of the global matrices)."""
        return self.coeffs.reshape(-1)

    def copy(self) -> "DGFunction":
        return DGFunction(self.mesh, self.degree, self.coeffs.copy())

    def with_coeffs(self, coeffs: np.ndarray) -> "DGFunction":
        return DGFunction(self.mesh, self.degree, coeffs)

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    @property
    def averages(self) -> np.ndarray:
        return self.coeffs[:, 0]

    def right_traces(self) -> np.ndarray:
        """u at the right end of every cell (P_m(1) = 1)."""
        return self.coeffs.sum(axis=1)

    def left_traces(self) -> np.ndarray:
        """u at the left end of every cell."""
        return self.coeffs @ mode_signs(self.degree)

    def values_at(self, xi) -> np.ndarray:
        """Values at reference points xi in every cell, shape (N, len(xi))."""
        return self.coeffs @ legendre_table(self.degree, np.atleast_1d(xi)).T

    def nodal_values(self, ref: ReferenceElement) -> np.ndarray:
        return self.coeffs @ ref.values.T

    def evaluate(self, x) -> np.ndarray:
        """Point values at physical coordinates (right-continuous at interior edges)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        edges = self.mesh.cell_edges
        cells = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, self.n_cells - 1)
        xi = 2.0 * (x - self.mesh.centers[cells]) / self.mesh.widths[cells]
        return np.einsum("pm,pm->p", legendre_table(self.degree, xi), self.coeffs[cells])

    def _check_compatible(self, other: "DGFunction"):
        if self.degree != other.degree or not self.mesh.same_as(other.mesh):
            raise MeshMismatchError("DG functions live on different meshes or degrees")

    def __add__(self, other: "DGFunction") -> "DGFunction":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "DGFunction") -> "DGFunction":
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "DGFunction":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "DGFunction":
        return self.with_coeffs(-self.coeffs)


def inverse_mass(mesh: Mesh1D, k: int) -> np.ndarray:
    """(2m + 1) / h_j for every cell and mode, shape (N, k + 1)."""
    return (2.0 * np.arange(k + 1) + 1.0)[None, :] / mesh.widths[:, None]


def project_nodal(values: np.ndarray, mesh: Mesh1D, k: int, ref: ReferenceElement) -> DGFunction:
    """L2 projection of data sampled at the Gauss nodes of `ref`."""
    values = np.broadcast_to(values, (mesh.n_cells, ref.rule.n_points))
    return DGFunction(mesh, k, values @ ref.projection)


def l2_project(
    f: Callable[[np.ndarray], np.ndarray], mesh: Mesh1D, k: int, n_points: int = NONLINEAR_POINTS
) -> DGFunction:
    """Cellwise L2 projection of f onto V_h."""
    ref = reference_element(k, max(n_points, k + 1))
    return project_nodal(f(mesh.physical_points(ref.nodes)), mesh, k, ref)


def gauss_radau_project(
    f: Callable[[np.ndarray], np.ndarray],
    mesh: Mesh1D,
    k: int,
    side: Side = Side.MINUS,
    n_points: int = NONLINEAR_POINTS,
) -> DGFunction:
    """Gauss-Radau projection: moments up to degree k-1 plus one endpoint collocation.

    MINUS matches f at the right end of every cell, PLUS at the left end.
    """
    side = Side(side)
    coeffs = l2_project(f, mesh, k, n_points).coeffs
    edges = mesh.cell_edges
    if side == Side.MINUS:
        target = np.broadcast_to(f(edges[1:]), (mesh.n_cells,))
        coeffs[:, k] = target - coeffs[:, :k].sum(axis=1)
    else:
        target = np.broadcast_to(f(edges[:-1]), (mesh.n_cells,))
        signs = mode_signs(k)
        coeffs[:, k] = (target - coeffs[:, :k] @ signs[:k]) * signs[k]
    return DGFunction(mesh, k, coeffs)


def trace(u: DGFunction, interface: int, side: Side) -> float:
    """One-sided limit at interface `interface` (0 is x_{1/2}, N is x_{N+1/2})."""
    side = Side(side)
    n = u.n_cells
    if not 0 <= interface <= n:
        raise ConfigurationError(f"interface index {interface} outside 0..{n}")
    if side == Side.MINUS:
        cell = interface - 1
        if cell < 0:
            if not u.mesh.is_periodic:
                raise BoundaryTraceError("no trace outside the left Dirichlet boundary")
            cell = n - 1
        return float(u.coeffs[cell].sum())
    cell = interface
    if cell >= n:
        if not u.mesh.is_periodic:
            raise BoundaryTraceError("no trace outside the right Dirichlet boundary")
        cell = 0
    return float(u.coeffs[cell] @ mode_signs(u.degree))


def jump(u: DGFunction, interface: int) -> float:
    """[[u]] = u^+ - u^-."""
    return trace(u, interface, Side.PLUS) - trace(u, interface, Side.MINUS)


def l2_norm(u: DGFunction) -> float:
    """Exact L2 norm from the orthogonality of the basis."""
    weights = u.mesh.widths[:, None] / (2.0 * np.arange(u.degree + 1) + 1.0)[None, :]
    return float(np.sqrt(np.sum(weights * u.coeffs**2)))


def total_mass(u: DGFunction) -> float:
    """Integral of u over the domain."""
    return float(np.sum(u.mesh.widths * u.coeffs[:, 0]))


def _cell_integral(values: np.ndarray, mesh: Mesh1D, rule: QuadratureRule) -> float:
    return float(np.sum(0.5 * mesh.widths * (values @ rule.weights)))


def l2_error(
    u: DGFunction,
    exact: Callable[[np.ndarray, float], np.ndarray],
    t: float,
    n_points: int = NONLINEAR_POINTS,
) -> float:
    """||u - exact(., t)||_{L2} by Gauss quadrature."""
    ref = reference_element(u.degree, max(n_points, u.degree + 2))
    diff = u.nodal_values(ref) - exact(u.mesh.physical_points(ref.nodes), t)
    return float(np.sqrt(_cell_integral(diff**2, u.mesh, ref.rule)))


def l1_error(
    u: DGFunction,
    exact: Callable[[np.ndarray, float], np.ndarray],
    t: float,
    n_points: int = NONLINEAR_POINTS,
) -> float:
    ref = reference_element(u.degree, max(n_points, u.degree + 2))
    diff = u.nodal_values(ref) - exact(u.mesh.physical_points(ref.nodes), t)
    return _cell_integral(np.abs(diff), u.mesh, ref.rule)


def l1_diff(u: DGFunction, v: DGFunction, n_points: int = NONLINEAR_POINTS) -> float:
    """||u - v||_{L1} for functions on the same mesh."""
    u._check_compatible(v)
    ref = reference_element(u.degree, max(n_points, u.degree + 2))
    return _cell_integral(np.abs((u - v).nodal_values(ref)), u.mesh, ref.rule)


def sample_points(u: DGFunction, samples_per_cell: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform samples in every cell (cell centre when one sample is asked)."""
    if samples_per_cell < 1:
        raise ConfigurationError("need at least one sample per cell")
    xi = np.linspace(-1.0, 1.0, samples_per_cell) if samples_per_cell > 1 else np.zeros(1)
    x = u.mesh.physical_points(xi).reshape(-1)
    return x, u.values_at(xi).reshape(-1)
