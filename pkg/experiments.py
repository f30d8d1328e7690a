"""Experiment runners: convergence tables, stability scans, PME and high-field runs."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config import RunConfig, Settings, config
from errors import ConfigurationError, SolverBlowupError
from fem import (
    BoundaryKind,
    DGFunction,
    DirichletData,
    Mesh1D,
    l1_error,
    l2_error,
    l2_norm,
    total_mass,
)
from imex import STABLE_A0_FRACTION, EinConfig, EinSolver
from implicit_solver import dense_solve, factorize, solve
from ldg import assemble_discrete_laplacian, op_K, op_L
from limiter import LimiterConfig, apply_positivity, check_point_values
from problems import get_problem
from problems.base import ProblemSpec
from problems.highfield import HighFieldParams, HighFieldState, highfield_step_driver
from problems.pme import support_edges
from reporting import (
    write_convergence_table,
    write_energy_trace,
    write_report,
    write_run_log,
    write_snapshot,
    write_stability_report,
)

STABLE_GROWTH = 10.0
HIGHFIELD_DT = 3.6e-4
HIGHFIELD_CELLS = [200]


@dataclass
class ConvergenceRow:
    N: int
    h: float
    dt: float
    l2_error: float
    order: Optional[float] = None


@dataclass
class StabilityRow:
    a0: float
    N: int
    dt: float
    stable: bool
    initial_norm: float
    final_norm: float
    steps: int


def convergence_orders(errors: Sequence[float]) -> List[Optional[float]]:
    """log2(e_N / e_2N); None for the first row and around blown-up rows."""
    orders: List[Optional[float]] = [None]
    for previous, current in zip(errors[:-1], errors[1:]):
        if math.isfinite(previous) and math.isfinite(current) and current > 0.0:
            orders.append(math.log2(previous / current))
        else:
            orders.append(None)
    return orders


class ExperimentRunner:
    """Drive one configured experiment and write its artefacts."""

    def __init__(self, cfg: RunConfig, settings: Settings = config):
        self.cfg = cfg
        self.settings = settings
        self.out_dir = Path(cfg.output_dir) if cfg.output_dir else settings.output_dir / cfg.experiment
        self.unexpected_blowups: List[str] = []

    def _given(self, name: str) -> bool:
        return name in self.cfg.model_fields_set

    def build_problem(self) -> ProblemSpec:
        params = dict(b=self.cfg.b, m=self.cfg.m)
        if self._given("order") or self._given("degree"):
            params["order"] = self.cfg.order
        return get_problem(self.cfg.experiment, **params)

    def scheme(self, problem: ProblemSpec) -> Tuple[int, int]:
        """(degree, order): explicit settings win over the problem's recommendation."""
        if self._given("degree") or self._given("order"):
            return self.cfg.degree, self.cfg.order
        return problem.defaults.get("degree", self.cfg.degree), problem.defaults.get("order", self.cfg.order)

    def ein_config(self, problem: ProblemSpec, h: float, order: int, a0: Optional[float] = None) -> EinConfig:
        cfg = self.cfg
        dt_factor = cfg.dt_factor if self._given("dt_factor") else problem.defaults.get("dt_factor", cfg.dt_factor)
        dt = cfg.dt if cfg.dt is not None else dt_factor * h
        if a0 is None and cfg.a0 is None and cfg.a0_safety is None:
            a0 = problem.defaults.get("a0")
            if a0 is None and problem.defaults.get("fixed_a0") and problem.a_max is not None:
                a0 = STABLE_A0_FRACTION[order] * problem.a_max
        elif a0 is None:
            a0 = cfg.a0
        safety = cfg.a0_safety if cfg.a0_safety is not None else problem.defaults.get("a0_safety")
        return EinConfig(
            order=order,
            dt=dt,
            a0=a0,
            a0_safety=safety,
            a0_refresh_interval=cfg.a0_refresh,
        )

    def expected_stable(self, problem: ProblemSpec, ein: EinConfig) -> bool:
        if ein.adaptive or problem.a_max is None:
            return True
        return ein.a0 >= STABLE_A0_FRACTION[ein.order] * problem.a_max - 1e-12

    def final_time(self, problem: ProblemSpec) -> float:
        return self.cfg.final_time if self.cfg.final_time is not None else problem.final_time

    def limiter_for(self, problem: ProblemSpec) -> Optional[LimiterConfig]:
        enabled = self.cfg.limiter if self.cfg.limiter is not None else problem.limiter
        return LimiterConfig() if enabled else None

    # Convergence -------------------------------------------------------

    def run_row(self, problem: ProblemSpec, n_cells: int) -> ConvergenceRow:
        k, order = self.scheme(problem)
        mesh = problem.make_mesh(n_cells)
        ein = self.ein_config(problem, mesh.h, order)
        u0 = problem.project_initial(mesh, k)
        t_final = self.final_time(problem)
        try:
            solver = EinSolver(problem, u0, ein, t0=problem.initial_time, limiter=self.limiter_for(problem))
            u = solver.advance_to(t_final)
            error = l2_error(u, problem.exact, t_final)
        except SolverBlowupError as e:
            logger.error(f"N={n_cells}: {e}")
            error = math.inf
            if self.expected_stable(problem, ein):
                self.unexpected_blowups.append(f"{problem.name} N={n_cells}: {e}")
        logger.info(f"N={n_cells:5d}  dt={ein.dt:.4e}  L2 error={error:.3e}")
        return ConvergenceRow(N=n_cells, h=mesh.h, dt=ein.dt, l2_error=error)

    def run_convergence(self) -> List[ConvergenceRow]:
        """One row per mesh size; rows may run in parallel, output is written in N order."""
        problem = self.build_problem()
        if problem.exact is None:
            raise ConfigurationError(f"{problem.name} has no exact solution for a convergence study")
        k, order = self.scheme(problem)
        logger.info("=" * 80)
        logger.info(f"CONVERGENCE: {problem.name}, k={k}, order={order}, cells={self.cfg.cells}")
        logger.info("=" * 80)

        cells = sorted(self.cfg.cells)
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                rows = list(pool.map(lambda n: self.run_row(problem, n), cells))
        else:
            rows = [self.run_row(problem, n) for n in cells]
        for row, order_value in zip(rows, convergence_orders([r.l2_error for r in rows])):
            row.order = order_value
        write_convergence_table(self.out_dir, rows)
        return rows

    # Stability ---------------------------------------------------------

    def run_stability_scan(self, a0_values: Optional[Sequence[float]] = None) -> List[StabilityRow]:
        """March once per a0 and classify stable when ||u_T|| <= 10 ||u_0||."""
        problem = self.build_problem()
        values = list(a0_values if a0_values is not None else self.cfg.a0_values)
        if not values:
            raise ConfigurationError("stability scan needs at least one a0 value")
        k, order = self.scheme(problem)
        n_cells = self.cfg.cells[-1]
        mesh = problem.make_mesh(n_cells)
        t_final = self.final_time(problem)
        logger.info("=" * 80)
        logger.info(f"STABILITY SCAN: {problem.name}, N={n_cells}, k={k}, order={order}, a0 in {values}")
        logger.info("=" * 80)

        rows = []
        for a0 in values:
            ein = self.ein_config(problem, mesh.h, order, a0=a0)
            u0 = problem.project_initial(mesh, k)
            solver = EinSolver(problem, u0, ein, t0=problem.initial_time, track_energy=True)
            try:
                solver.advance_to(t_final)
                final_norm = l2_norm(solver.u)
            except SolverBlowupError as e:
                logger.warning(f"a0={a0:g}: {e}")
                final_norm = math.inf
            stable = final_norm <= STABLE_GROWTH * solver.initial_norm
            logger.info(f"a0={a0:g}: {'stable' if stable else 'UNSTABLE'} (|u_T|={final_norm:.3e})")
            rows.append(
                StabilityRow(
                    a0=a0,
                    N=n_cells,
                    dt=ein.dt,
                    stable=stable,
                    initial_norm=solver.initial_norm,
                    final_norm=final_norm,
                    steps=solver.steps,
                )
            )
            write_energy_trace(self.out_dir / f"a0_{a0:g}", solver.energy.to_frame())
        write_stability_report(self.out_dir, rows)
        return rows

    # Porous medium -----------------------------------------------------

    def run_pme(self) -> Dict[str, float]:
        """Snapshots at the scheduled times plus a mass / positivity / support log."""
        problem = self.build_problem()
        k, order = self.scheme(problem)
        if self._given("cells"):
            n_cells = self.cfg.cells[0]
        else:
            n_cells = int(round((problem.domain[1] - problem.domain[0]) / problem.defaults.get("h", 0.02)))
        mesh = problem.make_mesh(n_cells)
        ein = self.ein_config(problem, mesh.h, order)
        limiter = self.limiter_for(problem)
        t_final = self.final_time(problem)
        times = self.cfg.snapshot_times or problem.defaults.get("snapshot_times", [t_final])

        logger.info("=" * 80)
        logger.info(f"PME: {problem.name}, N={n_cells}, k={k}, order={order}, dt={ein.dt:.3e}")
        logger.info("=" * 80)

        u0 = problem.project_initial(mesh, k)
        solver = EinSolver(problem, u0, ein, t0=problem.initial_time, limiter=limiter)
        log: List[Dict[str, float]] = []

        def record(t: float, u: DGFunction):
            check = limiter or LimiterConfig()
            edges = support_edges(u)
            entry = dict(
                t=t,
                mass=total_mass(u),
                min_value=float(check_point_values(u, check).min()),
                support_left=edges[0] if edges else math.nan,
                support_right=edges[1] if edges else math.nan,
                steps=solver.steps,
            )
            log.append(entry)
            logger.info(
                f"t={t:.3f}  mass={entry['mass']:.10f}  min={entry['min_value']:.2e}  "
                f"support=[{entry['support_left']:.3f}, {entry['support_right']:.3f}]"
            )
            write_snapshot(self.out_dir, u, t, self.cfg.samples_per_cell)

        if any(abs(t - solver.t) < 1e-12 for t in times):
            record(solver.t, solver.u)
        solver.advance_to(t_final, snapshot_times=[t for t in times if t > solver.t], on_snapshot=record)
        if not log or log[-1]["t"] != solver.t:
            record(solver.t, solver.u)
        write_run_log(self.out_dir, log)

        summary = dict(problem=problem.name, cells=n_cells, steps=solver.steps, final_time=solver.t, final_a0=solver.a0)
        if problem.exact is not None:
            summary["l1_error"] = l1_error(solver.u, problem.exact, solver.t)
            summary["l2_error"] = l2_error(solver.u, problem.exact, solver.t)
            logger.info(f"L1 error {summary['l1_error']:.3e}, L2 error {summary['l2_error']:.3e}")
        write_report(self.out_dir, summary)
        return summary

    # High field --------------------------------------------------------

    def run_highfield(self) -> List[Dict[str, float]]:
        """Steady state per mesh size; optional explicit SSP-RK3 reference."""
        params = HighFieldParams(v_bias=self.cfg.v_bias)
        cells = self.cfg.cells if self._given("cells") else HIGHFIELD_CELLS
        dt = self.cfg.dt if self.cfg.dt is not None else HIGHFIELD_DT
        k = self.cfg.degree if self._given("degree") else 2
        order = self.cfg.order if self._given("order") else 3
        safety = self.cfg.a0_safety if self.cfg.a0_safety is not None else 1.0
        ein = EinConfig(order=order, dt=dt, a0=self.cfg.a0, a0_safety=safety, a0_refresh_interval=self.cfg.a0_refresh)

        reports = []
        for n_cells in cells:
            logger.info("=" * 80)
            logger.info(f"HIGH FIELD: N={n_cells}, k={k}, dt={dt:.3e}")
            logger.info("=" * 80)
            out_dir = self.out_dir / f"N{n_cells}"
            result = highfield_step_driver(
                HighFieldState.initial(params, n_cells, k), ein, self.cfg.steady_tol, self.cfg.max_steps
            )
            report = dict(
                cells=n_cells,
                dt=dt,
                nt=result.steps,
                steady_time=result.time,
                cpu_seconds=result.wall_time,
            )
            write_snapshot(out_dir, result.n, result.time, self.cfg.samples_per_cell, name="n")
            write_snapshot(out_dir, result.E, result.time, self.cfg.samples_per_cell, name="E")
            if self.cfg.explicit_reference:
                reference = highfield_step_driver(
                    HighFieldState.initial(params, n_cells, k),
                    ein,
                    self.cfg.steady_tol,
                    max_steps=max(self.cfg.max_steps, 100 * result.steps),
                    explicit=True,
                )
                report.update(
                    explicit_dt=reference.dt,
                    explicit_nt=reference.steps,
                    explicit_steady_time=reference.time,
                    explicit_cpu_seconds=reference.wall_time,
                    step_ratio=reference.steps / result.steps,
                )
            write_report(out_dir, report)
            reports.append(report)
        return reports

    # Self test ---------------------------------------------------------

    def run_selftest(self, n_cells: int = 16, seed: int = 0) -> List["CheckResult"]:
        """Operator identities on random data; every check must pass."""
        logger.info("=" * 80)
        logger.info(f"SELF TEST: N={n_cells}, degrees 0..2")
        logger.info("=" * 80)
        rng = np.random.default_rng(seed)
        results: List[CheckResult] = []
        for k in range(3):
            results.extend(operator_checks(n_cells, k, rng))
        for result in results:
            log = logger.info if result.passed else logger.error
            log(f"{'PASS' if result.passed else 'FAIL'}  {result.name:<40} {result.value:.3e} (tol {result.tolerance:.0e})")
        write_report(self.out_dir, {r.name: f"{r.value:.3e} {'ok' if r.passed else 'FAILED'}" for r in results}, "selftest.txt")
        return results


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


def inner_product(u: DGFunction, v: DGFunction) -> float:
    """(u, v) over the domain, exact through basis orthogonality."""
    weights = u.mesh.widths[:, None] / (2.0 * np.arange(u.degree + 1) + 1.0)[None, :]
    return float(np.sum(weights * u.coeffs * v.coeffs))


def _random(mesh: Mesh1D, k: int, rng: np.random.Generator) -> DGFunction:
    return DGFunction(mesh, k, rng.standard_normal((mesh.n_cells, k + 1)))


def operator_checks(n_cells: int, k: int, rng: np.random.Generator) -> List[CheckResult]:
    """Duality of K and L, matrix against matrix-free D, banded against dense solves, limiter bounds."""
    periodic = Mesh1D.uniform(-np.pi, np.pi, n_cells)
    dirichlet = Mesh1D.uniform(0.0, 1.0, n_cells, BoundaryKind.DIRICHLET, DirichletData(0.3, -0.2))
    results = []

    u, q = _random(periodic, k, rng), _random(periodic, k, rng)
    scale = max(1.0, l2_norm(u) * l2_norm(q) / periodic.h)
    duality = abs(inner_product(op_K(u), q) + inner_product(u, op_L(q))) / scale
    results.append(CheckResult(f"k={k} duality (Ku,q)+(u,Lq)", duality, 1e-12))

    for mesh in (periodic, dirichlet):
        label = "periodic" if mesh.is_periodic else "dirichlet"
        laplacian = assemble_discrete_laplacian(mesh, k)
        u = _random(mesh, k, rng)
        matrix_free = op_L(op_K(u, 0.0)).vector()
        assembled = laplacian.apply(u, 0.0).vector()
        gap = np.abs(matrix_free - assembled).max() / max(1.0, np.abs(matrix_free).max())
        results.append(CheckResult(f"k={k} {label} D u vs L(K(u))", gap, 1e-12))

        rhs = rng.standard_normal(laplacian.size)
        shift = 0.7 * mesh.h
        x = solve(factorize(laplacian, shift), rhs, check_residual=False)
        reference = dense_solve(laplacian, shift, rhs)
        gap = np.abs(x - reference).max() / max(1.0, np.abs(reference).max())
        results.append(CheckResult(f"k={k} {label} factorized vs dense", gap, 1e-10))

        u = _random(mesh, k, rng)
        back = DGFunction.from_vector(mesh, k, u.vector())
        results.append(CheckResult(f"k={k} {label} vector round trip", float(np.abs(back.coeffs - u.coeffs).max()), 0.0))

    if k > 0:
        coeffs = rng.standard_normal((n_cells, k + 1))
        coeffs[:, 0] = np.abs(coeffs[:, 0]) + 0.05
        u = DGFunction(dirichlet, k, coeffs)
        cfg = LimiterConfig()
        limited = apply_positivity(u, cfg)
        undershoot = max(0.0, -float(check_point_values(limited, cfg).min()))
        results.append(CheckResult(f"k={k} limiter check-point minimum", undershoot, 1e-13))
        drift = float(np.abs(limited.averages - u.averages).max())
        results.append(CheckResult(f"k={k} limiter keeps averages", drift, 0.0))
    return results
