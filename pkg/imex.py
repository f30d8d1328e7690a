"""IMEX Runge-Kutta stepping and the explicit-implicit-null (EIN) driver.

The EIN splitting adds and subtracts a0 * u_xx: the constant-coefficient
part a0 * L(K(u)) is advanced implicitly with a factorization cached per
(a0, dt, gamma) epoch, everything else explicitly.
"""
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import ConfigurationError, SolverBlowupError
from fem import DGFunction, Mesh1D, l2_norm, l2_project, reference_element
from implicit_solver import ImplicitFactorization, factorize, solve
from ldg import DiscreteLaplacian, Diffusion, assemble_discrete_laplacian, lax_friedrichs_bound, op_K, op_convection
from limiter import LimiterConfig, apply_positivity

if TYPE_CHECKING:
    from problems.base import ProblemSpec

TABLEAU_TOLERANCE = 1e-14
BLOWUP_FACTOR = 1e6
ENERGY_TOLERANCE = 1e-12
# a0 / max a(u) from which the scheme of each order stays stable
STABLE_A0_FRACTION = {1: 0.5, 2: 0.5, 3: 0.54}

StageOp = Callable[[DGFunction, float], DGFunction]


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Paired implicit (A, b) and explicit (A_hat, b_hat) tableaus sharing c."""

    name: str
    order: int
    A: np.ndarray
    A_hat: np.ndarray
    b: np.ndarray
    b_hat: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        arrays = {key: np.array(getattr(self, key), dtype=float) for key in ("A", "A_hat", "b", "b_hat", "c")}
        for key, value in arrays.items():
            value.flags.writeable = False
            object.__setattr__(self, key, value)
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.A_hat.shape != (n, n):
            raise ConfigurationError(f"{self.name}: A and A_hat must both be square of the same size")
        if self.b.shape != (n,) or self.b_hat.shape != (n,) or self.c.shape != (n,):
            raise ConfigurationError(f"{self.name}: b, b_hat and c must have length {n}")
        if np.any(np.triu(self.A, 1)):
            raise ConfigurationError(f"{self.name}: implicit matrix must be lower triangular")
        if np.any(np.triu(self.A_hat)):
            raise ConfigurationError(f"{self.name}: explicit matrix must be strictly lower triangular")
        if np.any(self.A[0]) or np.any(self.A_hat[0]):
            raise ConfigurationError(f"{self.name}: the first stage must be the previous solution")
        if not np.allclose(self.A_hat.sum(axis=1), self.c, rtol=0.0, atol=TABLEAU_TOLERANCE):
            raise ConfigurationError(f"{self.name}: explicit row sums differ from c")
        if not self.explicit_only and not np.allclose(
            self.A.sum(axis=1), self.c, rtol=0.0, atol=TABLEAU_TOLERANCE
        ):
            raise ConfigurationError(f"{self.name}: implicit row sums differ from c")

    @property
    def stages(self) -> int:
        """s + 1, counting the first stage."""
        return self.A.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.A)

    @property
    def explicit_only(self) -> bool:
        return not np.any(self.A)

    @property
    def stiffly_accurate(self) -> bool:
        return np.array_equal(self.b, self.A[-1]) and np.array_equal(self.b_hat, self.A_hat[-1])


def tableau_first_order() -> ButcherTableau:
    """Forward Euler for the explicit part, backward Euler for the implicit part."""
    return ButcherTableau(
        name="imex1",
        order=1,
        A=[[0, 0], [0, 1]],
        A_hat=[[0, 0], [1, 0]],
        b=[0, 1],
        b_hat=[1, 0],
        c=[0, 1],
    )


def tableau_second_order() -> ButcherTableau:
    """Second-order pair whose first intermediate stage is implicit."""
    return ButcherTableau(
        name="imex2",
        order=2,
        A=[[0, 0, 0], [0, 0.5, 0], [0.5, 0, 0.5]],
        A_hat=[[0, 0, 0], [0.5, 0, 0], [0, 1, 0]],
        b=[0.5, 0, 0.5],
        b_hat=[0, 1, 0],
        c=[0, 0.5, 1],
    )


def tableau_third_order() -> ButcherTableau:
    """Four-stage third-order L-stable pair (implicit diagonal 1/2)."""
    A = [
        [0, 0, 0, 0, 0],
        [0, 1 / 2, 0, 0, 0],
        [0, 1 / 6, 1 / 2, 0, 0],
        [0, -1 / 2, 1 / 2, 1 / 2, 0],
        [0, 3 / 2, -3 / 2, 1 / 2, 1 / 2],
    ]
    A_hat = [
        [0, 0, 0, 0, 0],
        [1 / 2, 0, 0, 0, 0],
        [11 / 18, 1 / 18, 0, 0, 0],
        [5 / 6, -5 / 6, 1 / 2, 0, 0],
        [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0],
    ]
    return ButcherTableau(
        name="imex3",
        order=3,
        A=A,
        A_hat=A_hat,
        b=A[-1],
        b_hat=A_hat[-1],
        c=[0, 1 / 2, 2 / 3, 1 / 2, 1],
    )


def tableau_cooper_sayfy(mu: float = 1.0) -> ButcherTableau:
    """Second-order pair with an explicit first intermediate stage (mu != 0)."""
    if mu == 0:
        raise ConfigurationError("mu must be non-zero")
    A = [[0, 0, 0], [mu / 2, 0, 0], [0.5, 0, 0.5]]
    A_hat = [[0, 0, 0], [mu / 2, 0, 0], [(mu - 1) / mu, 1 / mu, 0]]
    return ButcherTableau(
        name=f"cooper-sayfy(mu={mu:g})",
        order=2,
        A=A,
        A_hat=A_hat,
        b=A[-1],
        b_hat=A_hat[-1],
        c=[0, mu / 2, 1],
    )


def tableau_explicit_ssp_rk3() -> ButcherTableau:
    """Three-stage SSP Runge-Kutta; the implicit matrix is identically zero."""
    A_hat = [
        [0, 0, 0, 0],
        [1, 0, 0, 0],
        [1 / 4, 1 / 4, 0, 0],
        [1 / 6, 1 / 6, 2 / 3, 0],
    ]
    return ButcherTableau(
        name="ssp-rk3",
        order=3,
        A=np.zeros((4, 4)),
        A_hat=A_hat,
        b=np.zeros(4),
        b_hat=A_hat[-1],
        c=[0, 1, 1 / 2, 1],
    )


TABLEAUS = {1: tableau_first_order, 2: tableau_second_order, 3: tableau_third_order}


def tableau_for_order(order: int) -> ButcherTableau:
    try:
        return TABLEAUS[order]()
    except KeyError:
        raise ConfigurationError(f"no built-in IMEX tableau of order {order}") from None


def imex_step(
    u_n: DGFunction,
    t_n: float,
    dt: float,
    tableau: ButcherTableau,
    explicit_rhs: StageOp,
    implicit_apply: StageOp,
    implicit_solve: Callable[[float, float, DGFunction, float], DGFunction],
    stage_hook: Optional[Callable[[DGFunction], DGFunction]] = None,
) -> DGFunction:
    """Advance u_n by one IMEX Runge-Kutta step.

    Args:
        u_n: solution at t_n
        t_n: current time
        dt: step size
        tableau: IMEX pair
        explicit_rhs: N(u, t)
        implicit_apply: L(u, t)
        implicit_solve: (gamma, dt, rhs, t) -> Y with Y - gamma*dt*L(Y, t) = rhs
        stage_hook: applied to every stage value (positivity limiting)

    Returns:
        Solution at t_n + dt
    """
    if dt == 0.0:
        return u_n.copy()
    A, A_hat = tableau.A, tableau.A_hat
    n_stages = tableau.stages
    need_implicit = np.any(A != 0.0, axis=0) | (tableau.b != 0.0)
    need_explicit = np.any(A_hat != 0.0, axis=0) | (tableau.b_hat != 0.0)
    implicit_terms: Dict[int, DGFunction] = {}
    explicit_terms: Dict[int, DGFunction] = {}

    stage = u_n
    for i in range(n_stages):
        t_i = t_n + tableau.c[i] * dt
        if i > 0:
            coeffs = u_n.coeffs.copy()
            for j in range(i):
                if A[i, j] != 0.0:
                    coeffs += dt * A[i, j] * implicit_terms[j].coeffs
                if A_hat[i, j] != 0.0:
                    coeffs += dt * A_hat[i, j] * explicit_terms[j].coeffs
            stage = u_n.with_coeffs(coeffs)
            if A[i, i] != 0.0:
                stage = implicit_solve(A[i, i], dt, stage, t_i)
            if stage_hook is not None:
                stage = stage_hook(stage)
        if need_implicit[i]:
            implicit_terms[i] = implicit_apply(stage, t_i)
        if need_explicit[i]:
            explicit_terms[i] = explicit_rhs(stage, t_i)

    if tableau.stiffly_accurate:
        return stage
    coeffs = u_n.coeffs.copy()
    for j in range(n_stages):
        if tableau.b[j] != 0.0:
            coeffs += dt * tableau.b[j] * implicit_terms[j].coeffs
        if tableau.b_hat[j] != 0.0:
            coeffs += dt * tableau.b_hat[j] * explicit_terms[j].coeffs
    result = u_n.with_coeffs(coeffs)
    return stage_hook(result) if stage_hook is not None else result


def source_term(problem: "ProblemSpec", mesh: Mesh1D, k: int, t: float) -> Optional[DGFunction]:
    if problem.source is None:
        return None
    return l2_project(lambda x: problem.source(x, t), mesh, k)


@dataclass(eq=False)
class EinSplitting:
    """Explicit and implicit right-hand sides of the EIN-split problem for a fixed a0."""

    problem: "ProblemSpec"
    laplacian: DiscreteLaplacian
    a0: float
    convection_bound: Optional[float] = None

    def implicit(self, u: DGFunction, t: float) -> DGFunction:
        return self.laplacian.apply(u, t) * self.a0

    def explicit(self, u: DGFunction, t: float) -> DGFunction:
        coeffs = self.problem.diffusion.apply(u, t).coeffs - self.a0 * self.laplacian.apply(u, t).coeffs
        if self.problem.convection is not None:
            coeffs -= op_convection(u, self.problem.convection, self.convection_bound, t).coeffs
        source = source_term(self.problem, u.mesh, u.degree, t)
        if source is not None:
            coeffs += source.coeffs
        return u.with_coeffs(coeffs)


def ein_split_rhs(
    u: DGFunction,
    a0: float,
    problem: "ProblemSpec",
    t: float = 0.0,
    laplacian: Optional[DiscreteLaplacian] = None,
) -> Tuple[DGFunction, DGFunction]:
    """(explicit part, implicit part) of the semi-discrete right-hand side at u."""
    if not a0 > 0.0:
        raise ConfigurationError(f"a0 must be positive, got {a0}")
    if laplacian is None:
        laplacian = assemble_discrete_laplacian(u.mesh, u.degree)
    splitting = EinSplitting(problem=problem, laplacian=laplacian, a0=a0)
    return splitting.explicit(u, t), splitting.implicit(u, t)


class EinConfig(BaseModel):
    """Time-stepping policy of an EIN run."""

    model_config = ConfigDict(frozen=True)

    order: int = Field(default=2, ge=1, le=3)
    dt: float = Field(gt=0.0)
    a0: Optional[float] = Field(default=None, ge=0.0)
    a0_safety: Optional[float] = Field(default=None, ge=0.5)
    a0_refresh_interval: int = Field(default=100, ge=1)
    a0_floor: float = Field(default=1e-10, gt=0.0)

    @model_validator(mode="after")
    def default_safety(self) -> "EinConfig":
        if self.a0_safety is None:
            object.__setattr__(self, "a0_safety", STABLE_A0_FRACTION[self.order])
        return self

    @property
    def adaptive(self) -> bool:
        return self.a0 is None


def update_a0(
    u: DGFunction, a: Union[Diffusion, Callable[[np.ndarray], np.ndarray]], cfg: EinConfig
) -> float:
    """a0 = max(floor, safety * max a(u)) over quadrature nodes and cell-edge traces."""
    if isinstance(a, Diffusion):
        a_max = a.max_coefficient(u)
    else:
        ref = reference_element(u.degree)
        samples = np.concatenate((u.nodal_values(ref).ravel(), u.left_traces(), u.right_traces()))
        a_max = float(np.max(np.broadcast_to(a(samples), samples.shape)))
    return max(cfg.a0_floor, cfg.a0_safety * a_max)


def energy_coefficient(order: int) -> float:
    """Weight of a0*dt*||q||^2 in the stability functional."""
    return 1.0 if order == 1 else 0.5


class EnergyReport(NamedTuple):
    functional: float
    increase: float
    violated: bool


@dataclass
class EnergyTrace:
    """Append-only record of ||u||^2 and the weighted ||q||^2 term."""

    coefficient: float = 1.0
    records: List[dict] = field(default_factory=list)

    def append(self, step: int, t: float, u_norm_sq: float, q_term: float) -> dict:
        record = dict(step=step, t=t, u_norm_sq=u_norm_sq, q_term=q_term, functional=u_norm_sq + q_term)
        self.records.append(record)
        return record

    @property
    def functionals(self) -> np.ndarray:
        return np.array([r["functional"] for r in self.records])

    def violations(self, rel_tol: float = ENERGY_TOLERANCE) -> List[int]:
        """Steps at which the functional grew by more than rel_tol."""
        values = self.functionals
        steps = []
        for i in range(1, values.size):
            if values[i] - values[i - 1] > rel_tol * max(abs(values[i - 1]), 1e-300):
                steps.append(self.records[i]["step"])
        return steps

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=["step", "t", "u_norm_sq", "q_term", "functional"])


def energy_monitor(
    trace: EnergyTrace,
    u: DGFunction,
    q: DGFunction,
    a0: float,
    dt: float,
    step: Optional[int] = None,
    t: float = 0.0,
    rel_tol: float = ENERGY_TOLERANCE,
) -> EnergyReport:
    """Record the stability functional at u and flag an increase over the previous record."""
    u_norm_sq = l2_norm(u) ** 2
    q_term = trace.coefficient * a0 * dt * l2_norm(q) ** 2
    previous = trace.records[-1]["functional"] if trace.records else None
    record = trace.append(len(trace.records) if step is None else step, t, u_norm_sq, q_term)
    if previous is None:
        return EnergyReport(record["functional"], 0.0, False)
    increase = record["functional"] - previous
    violated = increase > rel_tol * max(abs(previous), 1e-300)
    if violated:
        logger.warning(f"Energy functional increased by {increase:.3e} at step {record['step']}")
    return EnergyReport(record["functional"], increase, violated)


def stable_dt_explicit(mesh: Mesh1D, k: int, a_max: float, speed: float = 0.0, cfl: float = 0.5) -> float:
    """Step size for a fully explicit RK-LDG run (diffusive and convective limits)."""
    h = float(mesh.widths.min())
    p = 2 * k + 1
    limits = []
    if a_max > 0.0:
        limits.append(h * h / (2.0 * p * p * a_max))
    if speed > 0.0:
        limits.append(h / (p * speed))
    if not limits:
        raise ConfigurationError("need a positive diffusion or convection bound")
    return cfl * min(limits)


class EinSolver:
    """Stateful EIN-LDG march: owns u, t, a0 and the factorization cache."""

    def __init__(
        self,
        problem: "ProblemSpec",
        u0: DGFunction,
        cfg: EinConfig,
        t0: float = 0.0,
        tableau: Optional[ButcherTableau] = None,
        limiter: Optional[LimiterConfig] = None,
        track_energy: bool = False,
    ):
        self.problem = problem
        self.cfg = cfg
        self.tableau = tableau if tableau is not None else tableau_for_order(cfg.order)
        self.limiter = limiter
        self.laplacian = assemble_discrete_laplacian(u0.mesh, u0.degree)
        self.u = apply_positivity(u0, limiter) if limiter is not None else u0.copy()
        self.t = float(t0)
        self.steps = 0
        self.initial_norm = l2_norm(self.u)
        self._factorizations: Dict[Tuple[float, float, float], ImplicitFactorization] = {}
        self.a0 = cfg.a0 if not cfg.adaptive else update_a0(self.u, problem.diffusion, cfg)
        self.energy = EnergyTrace(coefficient=energy_coefficient(self.tableau.order)) if track_energy else None
        logger.debug(f"EIN solver ready: tableau={self.tableau.name}, a0={self.a0:.6g}, dt={cfg.dt:.6g}")

    @property
    def mesh(self) -> Mesh1D:
        return self.u.mesh

    def set_a0(self, a0: float):
        if a0 != self.a0:
            logger.debug(f"a0 refreshed at step {self.steps}: {self.a0:.6g} -> {a0:.6g}")
            self.a0 = a0
            self._factorizations.clear()

    def factorization(self, gamma: float, dt: float) -> ImplicitFactorization:
        epoch = (self.a0, dt, gamma)
        fact = self._factorizations.get(epoch)
        if fact is None:
            if len(self._factorizations) > 8:
                self._factorizations.clear()
            fact = factorize(self.laplacian, gamma * dt * self.a0, epoch=epoch)
            self._factorizations[epoch] = fact
        return fact

    def _implicit_solve(self, gamma: float, dt: float, rhs: DGFunction, t: float) -> DGFunction:
        fact = self.factorization(gamma, dt)
        vector = rhs.vector() + fact.shift * self.laplacian.boundary_term(t)
        return DGFunction.from_vector(rhs.mesh, rhs.degree, solve(fact, vector))

    def _stage_hook(self, u: DGFunction) -> DGFunction:
        return apply_positivity(u, self.limiter)

    def _record_energy(self, dt: float):
        q = op_K(self.u, self.t)
        energy_monitor(self.energy, self.u, q, self.a0, dt, step=self.steps, t=self.t)

    def step(self, dt: Optional[float] = None) -> DGFunction:
        """One IMEX step; refreshes a0 between steps when adaptive."""
        dt = self.cfg.dt if dt is None else dt
        if self.cfg.adaptive and self.steps > 0 and self.steps % self.cfg.a0_refresh_interval == 0:
            self.set_a0(update_a0(self.u, self.problem.diffusion, self.cfg))
        if self.energy is not None and not self.energy.records:
            self._record_energy(dt)

        bound = None
        if self.problem.convection is not None:
            bound = lax_friedrichs_bound(self.u, self.problem.convection)
        splitting = EinSplitting(self.problem, self.laplacian, self.a0, convection_bound=bound)
        hook = self._stage_hook if self.limiter is not None and self.limiter.enabled else None
        u_next = imex_step(
            self.u,
            self.t,
            dt,
            self.tableau,
            splitting.explicit,
            splitting.implicit,
            self._implicit_solve,
            stage_hook=hook,
        )

        self.steps += 1
        self.t += dt
        norm = l2_norm(u_next)
        if not np.all(np.isfinite(u_next.coeffs)):
            raise SolverBlowupError(self.steps, self.t, norm, "non-finite coefficients")
        if norm > BLOWUP_FACTOR * max(self.initial_norm, 1.0):
            raise SolverBlowupError(self.steps, self.t, norm, "norm exceeded blow-up threshold")
        self.u = u_next
        if self.energy is not None:
            self._record_energy(dt)
        return self.u

    def advance_to(
        self,
        t_final: float,
        snapshot_times: Iterable[float] = (),
        on_snapshot: Optional[Callable[[float, DGFunction], None]] = None,
        max_steps: Optional[int] = None,
    ) -> DGFunction:
        """March to t_final, shortening the last step (and steps before snapshots) to land exactly."""
        requested = {float(s) for s in snapshot_times if self.t <= s <= t_final}
        targets = sorted(requested | {float(t_final)})
        for target in targets:
            eps = 1e-12 * max(1.0, abs(target))
            while self.t < target - eps:
                if max_steps is not None and self.steps >= max_steps:
                    return self.u
                self.step(min(self.cfg.dt, target - self.t))
            self.t = target if abs(self.t - target) <= eps else self.t
            if on_snapshot is not None and target in requested:
                on_snapshot(self.t, self.u)
        return self.u
