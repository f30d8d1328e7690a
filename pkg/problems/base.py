"""Problem definitions shared by every experiment."""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import sympy as sp
from loguru import logger

from errors import ConfigurationError
from fem import BoundaryKind, DGFunction, DirichletData, Mesh1D, Side, gauss_radau_project, l2_project
from ldg import ConvectionFlux, Diffusion

SpaceFn = Callable[[np.ndarray], np.ndarray]
SpaceTimeFn = Callable[[np.ndarray, float], np.ndarray]

# Symbols used by manufactured solutions: position, time and the solution value.
X, T, U = sp.symbols("x t u", real=True)

SELF_CHECK_SAMPLES = 1000
SELF_CHECK_TOLERANCE = 1e-10


@dataclass
class ProblemSpec:
    """u_t + f(u)_x = (a u_x)_x + source on a 1D domain."""

    name: str
    domain: Tuple[float, float]
    diffusion: Diffusion
    initial: SpaceFn
    final_time: float
    boundary: BoundaryKind = BoundaryKind.PERIODIC
    dirichlet: Optional[DirichletData] = None
    source: Optional[SpaceTimeFn] = None
    exact: Optional[SpaceTimeFn] = None
    convection: Optional[ConvectionFlux] = None
    initial_time: float = 0.0
    initial_projection: Optional[Side] = Side.MINUS
    limiter: bool = False
    a_max: Optional[float] = None
    defaults: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        left, right = self.domain
        if not right > left:
            raise ConfigurationError(f"{self.name}: empty domain {self.domain}")
        if self.final_time <= self.initial_time:
            raise ConfigurationError(f"{self.name}: final time must follow the initial time")

    def make_mesh(self, n_cells: int) -> Mesh1D:
        return Mesh1D.uniform(self.domain[0], self.domain[1], n_cells, self.boundary, self.dirichlet)

    def project_initial(self, mesh: Mesh1D, k: int) -> DGFunction:
        """Gauss-Radau projection for smooth data, L2 projection when `initial_projection` is None."""
        if self.initial_projection is None:
            return l2_project(self.initial, mesh, k)
        return gauss_radau_project(self.initial, mesh, k, self.initial_projection)


def _vectorize(expr: sp.Expr, args) -> Callable:
    fn = sp.lambdify(args, expr, modules="numpy")

    def wrapped(*values):
        shape = np.broadcast(*values).shape
        return np.broadcast_to(fn(*values), shape).astype(float)

    return wrapped


@dataclass(frozen=True)
class Manufactured:
    """Exact solution and matching source derived symbolically."""

    exact_expr: sp.Expr
    source_expr: sp.Expr
    exact: SpaceTimeFn
    source: SpaceTimeFn
    residual: SpaceTimeFn


def manufacture(coefficient: sp.Expr, exact: sp.Expr) -> Manufactured:
    """Source f = u_t - (a u_x)_x for a given exact solution.

    Args:
        coefficient: a as an expression in U (solution dependent) and/or X
        exact: u(x, t) as an expression in X and T

    Returns:
        Lambdified exact solution, simplified source and the raw residual
    """
    a = coefficient.subs(U, exact)
    raw = sp.diff(exact, T) - sp.diff(a * sp.diff(exact, X), X)
    source = sp.simplify(raw)
    return Manufactured(
        exact_expr=exact,
        source_expr=source,
        exact=_vectorize(exact, (X, T)),
        source=_vectorize(source, (X, T)),
        residual=_vectorize(raw - source, (X, T)),
    )


def check_manufactured(
    name: str,
    manufactured: Manufactured,
    domain: Tuple[float, float],
    time_span: Tuple[float, float],
    n_samples: int = SELF_CHECK_SAMPLES,
    tol: float = SELF_CHECK_TOLERANCE,
    seed: int = 0,
) -> float:
    """Sampled max |u_t - (a u_x)_x - f|; raises when the source is inconsistent."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(*domain, n_samples)
    t = rng.uniform(*time_span, n_samples)
    worst = float(np.max(np.abs(manufactured.residual(x, t))))
    if not worst < tol:
        raise ConfigurationError(f"{name}: manufactured source residual {worst:.3e} exceeds {tol:.1e}")
    logger.debug(f"{name}: manufactured residual {worst:.2e}")
    return worst
