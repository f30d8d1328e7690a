"""High-field semiconductor model: electron concentration coupled to a Poisson potential.

    n_t + f(n, E)_x - (a(E) n_x)_x = 0      on (0, 0.6), periodic in n and E
    phi_xx = (e / eps) (n - n_d),  E = -phi_x,  Dirichlet phi_a, phi_b

Units are micrometres, picoseconds and volts; concentrations are carried in
um^-3 (1 um^-3 = 1e12 cm^-3) and masses in 1e-30 kg.
"""
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from errors import ConfigurationError, SteadyStateNotReachedError
from fem import NONLINEAR_POINTS, DGFunction, Mesh1D, gauss_quadrature, l1_diff, l2_project
from imex import (
    EinConfig,
    EinSolver,
    tableau_explicit_ssp_rk3,
    tableau_for_order,
    stable_dt_explicit,
)
from ldg import ConvectionFlux, SampledDiffusion, lax_friedrichs_bound, minus_traces, plus_traces
from poisson import PoissonSystem
from problems.base import ProblemSpec

CM3_TO_UM3 = 1e-12
MASS_UNIT_KG = 1e-30
STEADY_TOLERANCE = 1e-6


class HighFieldParams(BaseModel):
    """Physical constants of the model; derived quantities are always recomputed."""

    model_config = ConfigDict(frozen=True)

    length: float = Field(default=0.6, gt=0.0)
    e: float = Field(default=0.1602, gt=0.0)
    eps: float = Field(default=11.7 * 8.85418, gt=0.0)
    mass_kg: float = Field(default=0.26 * 0.9109e-31, gt=0.0)
    k_b: float = Field(default=0.138e-4, gt=0.0)
    t0: float = Field(default=300.0, gt=0.0)
    v_bias: float = 1.5
    n_i_cm3: float = Field(default=1.4e10, gt=0.0)
    doping_high_cm3: float = Field(default=5e17, gt=0.0)
    doping_low_cm3: float = Field(default=2e15, gt=0.0)
    ramp_down: tuple = (0.1, 0.15)
    ramp_up: tuple = (0.45, 0.5)

    @property
    def mass(self) -> float:
        return self.mass_kg / MASS_UNIT_KG

    @property
    def theta(self) -> float:
        return self.k_b * self.t0 / self.mass

    @property
    def e_over_eps(self) -> float:
        return self.e / self.eps

    @property
    def doping_high(self) -> float:
        return self.doping_high_cm3 * CM3_TO_UM3

    @property
    def doping_low(self) -> float:
        return self.doping_low_cm3 * CM3_TO_UM3

    @property
    def phi_a(self) -> float:
        """Built-in potential at x = 0: (k T0 / e) ln(n_d / n_i)."""
        return self.k_b * self.t0 / self.e * np.log(self.doping_high_cm3 / self.n_i_cm3)

    @property
    def phi_b(self) -> float:
        return self.phi_a + self.v_bias

    def _ramp(self, x):
        """Smoothstep weights and their slopes for both transitions."""
        x = np.asarray(x, dtype=float)
        out = []
        for start, end in (self.ramp_down, self.ramp_up):
            width = end - start
            tau = np.clip((x - start) / width, 0.0, 1.0)
            weight = tau * tau * (3.0 - 2.0 * tau)
            slope = np.where((x > start) & (x < end), 6.0 * tau * (1.0 - tau) / width, 0.0)
            out.append((weight, slope))
        return out

    def doping(self, x):
        """n_d(x): high plateaus at both ends, low plateau in the middle."""
        (down, _), (up, _) = self._ramp(x)
        jump = self.doping_high - self.doping_low
        return self.doping_high - jump * down + jump * up

    def doping_dx(self, x):
        (_, down), (_, up) = self._ramp(x)
        return (self.doping_high - self.doping_low) * (up - down)

    def mobility(self, x):
        return 0.0088 * (1.0 + 14.2273 / (1.0 + self.doping(x) / 143200.0))

    def mobility_dx(self, x):
        ratio = 1.0 + self.doping(x) / 143200.0
        return -0.0088 * 14.2273 / ratio**2 / 143200.0 * self.doping_dx(x)

    def gamma(self, x):
        """Relaxation parameter m mu / e."""
        return self.mass * self.mobility(x) / self.e

    def diffusion(self, x, E):
        """a(E) = gamma theta + gamma mu^2 E^2."""
        gamma = self.gamma(x)
        return gamma * self.theta + gamma * self.mobility(x) ** 2 * np.asarray(E) ** 2


def field_at(E: DGFunction, x) -> np.ndarray:
    """Point values of E, averaging both traces on cell edges (periodic at the seam)."""
    x = np.asarray(x, dtype=float)
    values = E.evaluate(x.ravel()).reshape(x.shape)
    edges = E.mesh.cell_edges
    on_edge = np.isin(x, edges)
    if np.any(on_edge):
        averages = 0.5 * (minus_traces(E) + plus_traces(E))
        index = np.searchsorted(edges, x[on_edge])
        values[on_edge] = averages[index]
    return values


class FrozenFieldFlux(ConvectionFlux):
    """f(n; x) = alpha(x) n^2 + beta(x) n with E, n_d, mu and mu_x frozen for one step."""

    def __init__(self, params: HighFieldParams, E: DGFunction, omega: float):
        self.params = params
        self.E = E
        self.omega = omega
        super().__init__(self._flux, self._slope)

    def coefficients(self, x):
        p = self.params
        E = field_at(self.E, x)
        mu, mu_x, gamma, n_d = p.mobility(x), p.mobility_dx(x), p.gamma(x), p.doping(x)
        k = p.e_over_eps
        alpha = 2.0 * gamma * mu**2 * k * E
        beta = -3.0 * gamma * mu**2 * k * E * n_d - mu * E * (1.0 + 3.0 * gamma * E * mu_x) + gamma * mu * k * self.omega
        return alpha, beta

    def _flux(self, n, x):
        alpha, beta = self.coefficients(x)
        return alpha * n * n + beta * n

    def _slope(self, n, x):
        alpha, beta = self.coefficients(x)
        return 2.0 * alpha * n + beta


def frozen_diffusion(params: HighFieldParams, E: DGFunction, n_points: int = NONLINEAR_POINTS) -> SampledDiffusion:
    """a(E) sampled at quadrature nodes and both one-sided edge values."""
    mesh = E.mesh
    rule = gauss_quadrature(n_points)
    x_nodes = mesh.physical_points(rule.nodes)
    nodal = params.diffusion(x_nodes, E.values_at(rule.nodes))
    left = params.diffusion(mesh.cell_edges[:-1], E.left_traces())
    right = params.diffusion(mesh.cell_edges[1:], E.right_traces())
    return SampledDiffusion(mesh, nodal, left, right, n_points)


def highfield_rhs(n: DGFunction, E: DGFunction, params: HighFieldParams, omega: float):
    """Convective flux and diffusion coefficient with the current field frozen."""
    return FrozenFieldFlux(params, E, omega), frozen_diffusion(params, E)


@dataclass
class HighFieldState:
    """Concentration with the cached Poisson factorization and omega."""

    mesh: Mesh1D
    params: HighFieldParams
    n: DGFunction
    poisson: PoissonSystem
    omega: float
    t: float = 0.0
    steps: int = 0
    _doping: Optional[DGFunction] = field(default=None, repr=False)

    @classmethod
    def initial(cls, params: HighFieldParams, n_cells: int, k: int = 2) -> "HighFieldState":
        """n = n_d; omega = mu n E at x = 0 from the initial Poisson solve."""
        mesh = Mesh1D.uniform(0.0, params.length, n_cells)
        n = l2_project(params.doping, mesh, k)
        poisson = PoissonSystem(mesh, k)
        state = cls(mesh=mesh, params=params, n=n, poisson=poisson, omega=0.0)
        E = state.field(n)
        state.omega = float(params.mobility(0.0) * params.doping(0.0) * field_at(E, np.array([0.0]))[0])
        logger.debug(f"High-field omega = {state.omega:.6e}")
        return state

    def charge(self, n: DGFunction) -> DGFunction:
        """(e / eps) (n - n_d)."""
        if self._doping is None:
            self._doping = l2_project(self.params.doping, self.mesh, n.degree)
        return (n - self._doping) * self.params.e_over_eps

    def field(self, n: DGFunction) -> DGFunction:
        _, psi = self.poisson.solve(self.charge(n), self.params.phi_a, self.params.phi_b)
        return -psi

    def problem(self, E: DGFunction) -> ProblemSpec:
        flux, diffusion = highfield_rhs(self.n, E, self.params, self.omega)
        return ProblemSpec(
            name="highfield",
            domain=(0.0, self.params.length),
            diffusion=diffusion,
            initial=self.params.doping,
            final_time=np.inf,
            convection=flux,
        )


@dataclass
class HighFieldResult:
    n: DGFunction
    E: DGFunction
    steps: int
    time: float
    wall_time: float
    dt: float
    method: str
    changes: List[float] = field(default_factory=list)


def highfield_step_driver(
    state: HighFieldState,
    cfg: EinConfig,
    steady_tol: float = STEADY_TOLERANCE,
    max_steps: int = 200_000,
    explicit: bool = False,
    log_every: int = 500,
) -> HighFieldResult:
    """March to the steady state: Poisson solve, freeze E, one step, L1 check.

    Args:
        state: initial high-field state (modified in place)
        cfg: EIN time stepping; a0 is max a(E) scaled by cfg.a0_safety
        steady_tol: stop once ||n^{nt} - n^{nt-1}||_{L1} drops below this
        max_steps: step budget
        explicit: run the SSP-RK3 explicit reference instead, with a stable dt

    Returns:
        Steady concentration and field with the step count and time

    Raises:
        SteadyStateNotReachedError: step budget exhausted
    """
    if max_steps < 1:
        raise ConfigurationError("max_steps must be positive")
    started = time.perf_counter()
    E = state.field(state.n)
    problem = state.problem(E)

    if explicit:
        cfg = EinConfig(order=3, dt=_explicit_dt(state, problem), a0=0.0, a0_refresh_interval=cfg.a0_refresh_interval)
        tableau = tableau_explicit_ssp_rk3()
    else:
        tableau = tableau_for_order(cfg.order)
    solver = EinSolver(problem, state.n, cfg, t0=state.t, tableau=tableau)
    method = "ex-rk-ldg" if explicit else "ein-ldg"
    logger.info(f"High-field march ({method}): N={state.mesh.n_cells}, dt={cfg.dt:.3e}, a0={solver.a0:.4e}")

    changes: List[float] = []
    dt = cfg.dt
    while True:
        if solver.steps >= max_steps:
            last = changes[-1] if changes else float("nan")
            logger.error(f"High-field run stopped after {solver.steps} steps without reaching steady state")
            raise SteadyStateNotReachedError(solver.steps, solver.t, last)
        if explicit and solver.steps > 0 and solver.steps % cfg.a0_refresh_interval == 0:
            dt = _explicit_dt(state, solver.problem)
        previous = solver.u
        solver.step(dt)
        state.n, state.t, state.steps = solver.u, solver.t, solver.steps
        change = l1_diff(solver.u, previous)
        changes.append(change)
        if solver.steps % log_every == 0:
            logger.debug(f"step {solver.steps}: t={solver.t:.4f}, L1 change {change:.3e}")
        if change < steady_tol:
            break
        E = state.field(state.n)
        solver.problem = state.problem(E)

    E = state.field(state.n)
    wall = time.perf_counter() - started
    logger.info(f"Steady state ({method}): nt={solver.steps}, t={solver.t:.4f}, cpu={wall:.1f}s")
    return HighFieldResult(
        n=state.n, E=E, steps=solver.steps, time=solver.t, wall_time=wall, dt=cfg.dt, method=method, changes=changes
    )


def _explicit_dt(state: HighFieldState, problem: ProblemSpec) -> float:
    a_max = problem.diffusion.max_coefficient(state.n)
    speed = lax_friedrichs_bound(state.n, problem.convection)
    return stable_dt_explicit(state.mesh, state.n.degree, a_max, speed)
