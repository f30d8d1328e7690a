"""LDG spatial operators with alternating fluxes.

All operators return M^{-1} applied to the corresponding bilinear form, so
their outputs are DGFunctions on the same mesh as the input:

    op_K(u)            q  ~ u_x        (u-hat = u^-)
    op_L(q)            ~ q_x           (q-hat = q^+)
    op_Ktilde(u, B)    p  ~ B(u)_x     (B-hat = B(u^-))
    op_Ltilde(u,p,b,B) ~ (b(u) p)_x    (p-hat = p^+, b-hat = [[B]] / [[u]])

Interface i (0..N) sits between cell i-1 and cell i. Periodic meshes wrap;
Dirichlet meshes take u-hat from the boundary data and the derivative flux
from the interior trace at both ends.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from errors import ConfigurationError
from fem import (
    NONLINEAR_POINTS,
    DGFunction,
    Mesh1D,
    Side,
    gauss_quadrature,
    inverse_mass,
    mode_signs,
    project_nodal,
    reference_element,
    stiffness_matrix,
)

# Jumps above this (relative to the traces) use the difference quotient.
JUMP_TOLERANCE = 1e-3

ScalarFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FluxSet:
    """Alternating flux pairing plus the Dirichlet adaptation.

    Interior: u-hat and B-hat from the MINUS side, q-hat and p-hat from PLUS.
    Dirichlet ends: u-hat is the boundary datum, q-hat the interior trace.
    """

    solution_side: Side = Side.MINUS
    derivative_side: Side = Side.PLUS

    def __post_init__(self):
        if (Side(self.solution_side), Side(self.derivative_side)) != (Side.MINUS, Side.PLUS):
            raise ConfigurationError(
                "only the alternating pairing u-hat = u^-, q-hat = q^+ is supported"
            )

    def solution_flux(self, u: DGFunction, t: float = 0.0) -> np.ndarray:
        """u-hat at all N + 1 interfaces."""
        flux = minus_traces(u)
        if not u.mesh.is_periodic:
            flux[0], flux[-1] = u.mesh.boundary_values(t)
        return flux

    def derivative_flux(self, q: DGFunction) -> np.ndarray:
        """q-hat at all N + 1 interfaces."""
        flux = plus_traces(q)
        if not q.mesh.is_periodic:
            flux[-1] = q.coeffs[-1].sum()
        return flux


ALTERNATING = FluxSet()


def minus_traces(u: DGFunction) -> np.ndarray:
    """u^- at every interface; the left end holds NaN on Dirichlet meshes."""
    right = u.right_traces()
    first = right[-1] if u.mesh.is_periodic else np.nan
    return np.concatenate(([first], right))


def plus_traces(u: DGFunction) -> np.ndarray:
    """u^+ at every interface; the right end holds NaN on Dirichlet meshes."""
    left = u.left_traces()
    last = left[0] if u.mesh.is_periodic else np.nan
    return np.concatenate((left, [last]))


def divergence(volume: np.ndarray, flux: np.ndarray, mesh: Mesh1D, k: int) -> DGFunction:
    """M^{-1} [ -(g, v_x)_j + g-hat_{j+1/2} v^- - g-hat_{j-1/2} v^+ ].

    Args:
        volume: (g, P_m') integrals on the reference cell, shape (N, k + 1)
        flux: interface values g-hat, length N + 1

    Returns:
        DGFunction approximating g_x
    """
    signs = mode_signs(k)
    rhs = -volume + flux[1:, None] - flux[:-1, None] * signs[None, :]
    return DGFunction(mesh, k, rhs * inverse_mass(mesh, k))


def op_K(u: DGFunction, t: float = 0.0, fluxes: FluxSet = ALTERNATING) -> DGFunction:
    """Auxiliary derivative q with (q, r) = K(u, r) for all r."""
    volume = u.coeffs @ stiffness_matrix(u.degree)
    return divergence(volume, fluxes.solution_flux(u, t), u.mesh, u.degree)


def op_L(q: DGFunction, fluxes: FluxSet = ALTERNATING) -> DGFunction:
    """Divergence of q with the opposite one-sided flux."""
    volume = q.coeffs @ stiffness_matrix(q.degree)
    return divergence(volume, fluxes.derivative_flux(q), q.mesh, q.degree)


def antiderivative(b: ScalarFn, n_points: int = NONLINEAR_POINTS) -> ScalarFn:
    """B(u) = int_0^u b(s) ds by Gauss quadrature, for coefficients without a closed form."""
    rule = gauss_quadrature(n_points)
    scaled = 0.5 * (rule.nodes + 1.0)

    def B(u):
        u = np.asarray(u, dtype=float)
        points = u[..., None] * scaled
        return 0.5 * u * (np.broadcast_to(b(points), points.shape) @ rule.weights)

    return B


def jump_mean(u_minus, u_plus, b: ScalarFn, n_points: int = NONLINEAR_POINTS):
    """int_0^1 b(u^- + s [[u]]) ds by Gauss quadrature."""
    rule = gauss_quadrature(n_points)
    scaled = 0.5 * (rule.nodes + 1.0)
    points = u_minus[..., None] + (u_plus - u_minus)[..., None] * scaled
    return 0.5 * (np.broadcast_to(b(points), points.shape) @ rule.weights)


def jump_ratio_flux(u_minus, u_plus, b: ScalarFn, B: ScalarFn, tol: float = JUMP_TOLERANCE):
    """b-hat = [[B(u)]] / [[u]].

    Jumps below tol (relative to the traces) use the mean of b over the jump,
    which equals the quotient without its cancellation error.
    """
    u_minus = np.asarray(u_minus, dtype=float)
    u_plus = np.asarray(u_plus, dtype=float)
    jump = u_plus - u_minus
    scale = np.maximum(1.0, np.maximum(np.abs(u_minus), np.abs(u_plus)))
    resolved = np.abs(jump) > tol * scale
    safe_jump = np.where(resolved, jump, 1.0)
    ratio = (B(u_plus) - B(u_minus)) / safe_jump
    result = np.where(resolved, ratio, jump_mean(u_minus, u_plus, b))
    return result if result.ndim else float(result)


def op_Ktilde(
    u: DGFunction,
    B: ScalarFn,
    t: float = 0.0,
    n_points: int = NONLINEAR_POINTS,
    fluxes: FluxSet = ALTERNATING,
) -> DGFunction:
    """p with (p, w) = K~(B(u), w); B-hat = B(u-hat)."""
    ref = reference_element(u.degree, n_points)
    volume = B(u.nodal_values(ref)) @ ref.weighted_derivatives
    flux = B(fluxes.solution_flux(u, t))
    return divergence(volume, flux, u.mesh, u.degree)


def interface_states(u: DGFunction, t: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """(u^-, u^+) at every interface with Dirichlet data standing in outside the domain."""
    left, right = minus_traces(u), plus_traces(u)
    if not u.mesh.is_periodic:
        left[0], right[-1] = u.mesh.boundary_values(t)
    return left, right


def op_Ltilde(
    u: DGFunction,
    p: DGFunction,
    b: ScalarFn,
    B: ScalarFn,
    t: float = 0.0,
    n_points: int = NONLINEAR_POINTS,
    fluxes: FluxSet = ALTERNATING,
) -> DGFunction:
    """Nonlinear divergence of b(u) p with p-hat = p^+."""
    ref = reference_element(u.degree, n_points)
    integrand = b(u.nodal_values(ref)) * p.nodal_values(ref)
    volume = integrand @ ref.weighted_derivatives
    b_hat = jump_ratio_flux(*interface_states(u, t), b, B)
    return divergence(volume, b_hat * fluxes.derivative_flux(p), u.mesh, u.degree)


class Diffusion(ABC):
    """Discrete (a u_x)_x for one diffusion coefficient."""

    @abstractmethod
    def apply(self, u: DGFunction, t: float = 0.0) -> DGFunction:
        """M^{-1} of the LDG diffusion form evaluated at u."""

    @abstractmethod
    def max_coefficient(self, u: DGFunction) -> float:
        """Largest value of a over quadrature nodes and cell-edge traces."""


class SolutionDiffusion(Diffusion):
    """a = a(u), with b = sqrt(a) and B' = b."""

    def __init__(
        self,
        a: ScalarFn,
        b: Optional[ScalarFn] = None,
        B: Optional[ScalarFn] = None,
        n_points: int = NONLINEAR_POINTS,
    ):
        self.a = a
        self.b = b if b is not None else (lambda u: np.sqrt(a(u)))
        self.B = B if B is not None else antiderivative(self.b)
        self.n_points = n_points

    def fluxes(self, u: DGFunction, t: float = 0.0) -> Tuple[DGFunction, DGFunction]:
        p = op_Ktilde(u, self.B, t, self.n_points)
        return p, op_Ltilde(u, p, self.b, self.B, t, self.n_points)

    def apply(self, u: DGFunction, t: float = 0.0) -> DGFunction:
        return self.fluxes(u, t)[1]

    def max_coefficient(self, u: DGFunction) -> float:
        ref = reference_element(u.degree, self.n_points)
        samples = np.concatenate(
            (u.nodal_values(ref).ravel(), u.left_traces(), u.right_traces())
        )
        return float(np.max(self.a(samples)))


class SampledDiffusion(Diffusion):
    """a = a(x), sampled once at the nonlinear quadrature nodes and cell edges.

    q = op_K(u), p = Pi(b q), then the divergence of b p with p-hat = p^+ and
    b-hat the mean of the two one-sided edge values.
    """

    def __init__(
        self,
        mesh: Mesh1D,
        nodal: np.ndarray,
        left_edge: np.ndarray,
        right_edge: np.ndarray,
        n_points: int = NONLINEAR_POINTS,
    ):
        nodal = np.asarray(nodal, dtype=float)
        if nodal.shape != (mesh.n_cells, n_points):
            raise ConfigurationError(
                f"nodal coefficient has shape {nodal.shape}, expected {(mesh.n_cells, n_points)}"
            )
        if np.any(nodal < 0.0):
            raise ConfigurationError("diffusion coefficient must be non-negative")
        self.mesh = mesh
        self.n_points = n_points
        self.nodal = nodal
        self.left_edge = np.asarray(left_edge, dtype=float)
        self.right_edge = np.asarray(right_edge, dtype=float)
        self.b_nodal = np.sqrt(nodal)
        b_minus = np.concatenate(([self.right_edge[-1]], self.right_edge))
        b_plus = np.concatenate((self.left_edge, [self.left_edge[0]]))
        if not mesh.is_periodic:
            b_minus[0] = self.left_edge[0]
            b_plus[-1] = self.right_edge[-1]
        self.b_hat = 0.5 * (np.sqrt(b_minus) + np.sqrt(b_plus))

    @classmethod
    def from_function(
        cls, a: Callable[[np.ndarray], np.ndarray], mesh: Mesh1D, n_points: int = NONLINEAR_POINTS
    ) -> "SampledDiffusion":
        rule = gauss_quadrature(n_points)
        nodal = np.broadcast_to(a(mesh.physical_points(rule.nodes)), (mesh.n_cells, n_points))
        edges = np.broadcast_to(a(mesh.cell_edges), mesh.cell_edges.shape)
        return cls(mesh, nodal, edges[:-1], edges[1:], n_points)

    def apply(self, u: DGFunction, t: float = 0.0) -> DGFunction:
        if not u.mesh.same_as(self.mesh):
            raise ConfigurationError("diffusion coefficient sampled on a different mesh")
        ref = reference_element(u.degree, self.n_points)
        q = op_K(u, t)
        p = project_nodal(self.b_nodal * q.nodal_values(ref), u.mesh, u.degree, ref)
        volume = (self.b_nodal * p.nodal_values(ref)) @ ref.weighted_derivatives
        return divergence(volume, self.b_hat * ALTERNATING.derivative_flux(p), u.mesh, u.degree)

    def max_coefficient(self, u: DGFunction) -> float:
        return float(max(self.nodal.max(), self.left_edge.max(), self.right_edge.max()))


class SpatialDiffusion(Diffusion):
    """a = a(x) given as a function; sampled lazily for every mesh it meets."""

    def __init__(self, a: Callable[[np.ndarray], np.ndarray], n_points: int = NONLINEAR_POINTS):
        self.a = a
        self.n_points = n_points
        self._sampled = {}

    def on(self, mesh: Mesh1D) -> SampledDiffusion:
        key = (mesh.boundary, mesh.cell_edges.tobytes())
        sampled = self._sampled.get(key)
        if sampled is None:
            sampled = SampledDiffusion.from_function(self.a, mesh, self.n_points)
            self._sampled[key] = sampled
        return sampled

    def apply(self, u: DGFunction, t: float = 0.0) -> DGFunction:
        return self.on(u.mesh).apply(u, t)

    def max_coefficient(self, u: DGFunction) -> float:
        return self.on(u.mesh).max_coefficient(u)


class ConvectionFlux:
    """Pointwise flux f(n, x) with an optional analytic derivative in n."""

    def __init__(
        self,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        derivative: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    ):
        self.fn = fn
        self.derivative = derivative

    def __call__(self, n: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.fn(n, x), np.shape(n))

    def slope(self, n: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self.derivative is not None:
            return np.broadcast_to(self.derivative(n, x), np.shape(n))
        eps = 1e-7 * np.maximum(1.0, np.abs(n))
        return (self(n + eps, x) - self(n - eps, x)) / (2.0 * eps)


def lax_friedrichs_bound(
    n: DGFunction, flux: ConvectionFlux, n_points: int = NONLINEAR_POINTS
) -> float:
    """max |df/dn| over quadrature nodes and cell-edge traces."""
    ref = reference_element(n.degree, n_points)
    mesh = n.mesh
    bounds = [
        np.abs(flux.slope(n.nodal_values(ref), mesh.physical_points(ref.nodes))).max(),
        np.abs(flux.slope(n.left_traces(), mesh.cell_edges[:-1])).max(),
        np.abs(flux.slope(n.right_traces(), mesh.cell_edges[1:])).max(),
    ]
    return float(max(bounds))


def op_convection(
    n: DGFunction,
    flux: ConvectionFlux,
    dflux_bound: Optional[float] = None,
    t: float = 0.0,
    n_points: int = NONLINEAR_POINTS,
) -> DGFunction:
    """Weak f(n)_x with the global Lax-Friedrichs interface flux."""
    if dflux_bound is None:
        dflux_bound = lax_friedrichs_bound(n, flux, n_points)
    ref = reference_element(n.degree, n_points)
    mesh = n.mesh
    volume = flux(n.nodal_values(ref), mesh.physical_points(ref.nodes)) @ ref.weighted_derivatives
    n_minus, n_plus = interface_states(n, t)
    x = mesh.cell_edges
    f_hat = 0.5 * (flux(n_minus, x) + flux(n_plus, x)) - 0.5 * dflux_bound * (n_plus - n_minus)
    return divergence(volume, f_hat, mesh, n.degree)


def _block_matrix(blocks, n_cells: int, nb: int) -> sp.csr_matrix:
    """Sparse matrix from (row cell, column cell, block) triples; duplicates are summed."""
    rows, cols, vals = [], [], []
    local_r, local_c = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    for i, j, block in blocks:
        rows.append((i * nb + local_r).ravel())
        cols.append((j * nb + local_c).ravel())
        vals.append(np.asarray(block).ravel())
    size = n_cells * nb
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()


@dataclass(eq=False)
class DiscreteLaplacian:
    """D with op_L(op_K(u, t)) = D u + boundary_term(t)."""

    mesh: Mesh1D
    degree: int
    matrix: sp.csr_matrix

    @property
    def block_size(self) -> int:
        return self.degree + 1

    @property
    def size(self) -> int:
        return self.mesh.n_cells * self.block_size

    def boundary_term(self, t: float = 0.0) -> np.ndarray:
        """Affine contribution of the Dirichlet data (zero when periodic)."""
        if self.mesh.is_periodic:
            return np.zeros(self.size)
        zero = DGFunction.zeros(self.mesh, self.degree)
        return op_L(op_K(zero, t)).vector()

    def apply(self, u: DGFunction, t: float = 0.0) -> DGFunction:
        vector = self.matrix @ u.vector() + self.boundary_term(t)
        return DGFunction.from_vector(self.mesh, self.degree, vector)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble_discrete_laplacian(mesh: Mesh1D, k: int) -> DiscreteLaplacian:
    """Block-tridiagonal (cyclic when periodic) assembly of L K."""
    n = mesh.n_cells
    S = stiffness_matrix(k)
    e = np.ones(k + 1)
    s = mode_signs(k)
    periodic = mesh.is_periodic
    minv = inverse_mass(mesh, k)

    k_blocks, l_blocks = [], []
    for j in range(n):
        scale = minv[j][:, None]
        last = j == n - 1
        k_diag = -S.T + (np.outer(e, e) if periodic or not last else 0.0)
        k_blocks.append((j, j, scale * k_diag))
        if periodic or j > 0:
            k_blocks.append((j, (j - 1) % n, -scale * np.outer(s, e)))

        l_diag = -S.T - np.outer(s, s)
        if last and not periodic:
            l_diag = l_diag + np.outer(e, e)
        l_blocks.append((j, j, scale * l_diag))
        if periodic or not last:
            l_blocks.append((j, (j + 1) % n, scale * np.outer(e, s)))

    K = _block_matrix(k_blocks, n, k + 1)
    L = _block_matrix(l_blocks, n, k + 1)
    D = (L @ K).tocsr()
    D.eliminate_zeros()
    return DiscreteLaplacian(mesh=mesh, degree=k, matrix=D)
