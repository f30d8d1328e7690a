"""Porous medium equation u_t = (u^m)_xx: Barenblatt, two-box collisions and waiting time."""
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import ConfigurationError
from fem import BoundaryKind, DGFunction, DirichletData
from ldg import SolutionDiffusion
from problems.base import ProblemSpec

SUPPORT_THRESHOLD = 1e-8
BARENBLATT_EXPONENTS = (2.0, 3.0, 5.0, 8.0)

# Recommended discretisation for every PME test.
PME_DEFAULTS = dict(h=0.02, degree=2, order=2, dt_factor=0.1, a0_refresh=100, a0_safety=0.5)


class BarenblattParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: float = Field(default=2.0, gt=1.0)

    @property
    def s(self) -> float:
        return 1.0 / (self.m + 1.0)


def barenblatt(params: BarenblattParams, x, t: float):
    """t^{-s} [(1 - s(m-1)/(2m) x^2 / t^{2s})_+]^{1/(m-1)}."""
    if t <= 0:
        raise ConfigurationError(f"Barenblatt solution needs t > 0, got {t}")
    m, s = params.m, params.s
    x = np.asarray(x, dtype=float)
    bracket = 1.0 - s * (m - 1.0) / (2.0 * m) * x**2 / t ** (2.0 * s)
    value = t ** (-s) * np.maximum(bracket, 0.0) ** (1.0 / (m - 1.0))
    return value if value.ndim else float(value)


def pme_diffusion(m: float) -> SolutionDiffusion:
    """a = m u^{m-1}, b = sqrt(m) u^{(m-1)/2}, B = 2 sqrt(m)/(m+1) u^{(m+1)/2}; u clipped at 0."""
    root = np.sqrt(m)

    def positive(u):
        return np.maximum(np.asarray(u, dtype=float), 0.0)

    return SolutionDiffusion(
        a=lambda u: m * positive(u) ** (m - 1.0),
        b=lambda u: root * positive(u) ** (0.5 * (m - 1.0)),
        B=lambda u: root * 2.0 / (m + 1.0) * positive(u) ** (0.5 * (m + 1.0)),
    )


class PmeTest(str, Enum):
    BARENBLATT = "barenblatt"
    TWO_BOX_EQUAL = "two-box-equal"
    TWO_BOX_UNEQUAL = "two-box-unequal"
    WAITING_TIME = "waiting-time"


SNAPSHOT_TIMES: Dict[PmeTest, List[float]] = {
    PmeTest.BARENBLATT: [2.0],
    PmeTest.TWO_BOX_EQUAL: [0.0, 0.3, 0.6, 0.9, 1.2, 1.5],
    PmeTest.TWO_BOX_UNEQUAL: [0.0, 0.05, 0.08, 0.11, 0.14, 0.17, 0.20, 0.23, 0.50],
    PmeTest.WAITING_TIME: [round(0.2 * i, 10) for i in range(10)],
}


def _boxes(boxes: List[Tuple[float, float, float]]):
    def initial(x):
        x = np.asarray(x, dtype=float)
        value = np.zeros_like(x)
        for left, right, height in boxes:
            value = np.where((x > left) & (x < right), height, value)
        return value

    return initial


def _waiting_time_initial(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 0.5 * np.pi, np.cos(x), 0.0)


def pme_spec(test: PmeTest, m: Optional[float] = None) -> ProblemSpec:
    """PME scenario with zero Dirichlet data, L2-projected initial data and the limiter on.

    Args:
        test: which scenario
        m: exponent; only the Barenblatt test accepts a choice (default 2)

    Returns:
        ProblemSpec with recommended defaults (h=0.02, k=2, second order, dt=0.1h)
    """
    test = PmeTest(test)
    common = dict(
        boundary=BoundaryKind.DIRICHLET,
        dirichlet=DirichletData(0.0, 0.0),
        initial_projection=None,
        limiter=True,
        defaults=dict(PME_DEFAULTS, snapshot_times=SNAPSHOT_TIMES[test]),
    )
    if test == PmeTest.BARENBLATT:
        params = BarenblattParams(m=2.0 if m is None else m)
        return ProblemSpec(
            name=f"barenblatt-m{params.m:g}",
            domain=(-6.0, 6.0),
            diffusion=pme_diffusion(params.m),
            initial=lambda x: barenblatt(params, x, 1.0),
            exact=lambda x, t: barenblatt(params, x, t),
            initial_time=1.0,
            final_time=2.0,
            a_max=params.m,
            **common,
        )
    if m is not None:
        raise ConfigurationError(f"{test.value} fixes its own exponent")
    if test == PmeTest.TWO_BOX_EQUAL:
        return ProblemSpec(
            name=test.value,
            domain=(-5.5, 5.5),
            diffusion=pme_diffusion(5.0),
            initial=_boxes([(-3.7, -0.7, 1.0), (0.7, 3.7, 1.0)]),
            final_time=1.5,
            a_max=5.0,
            **common,
        )
    if test == PmeTest.TWO_BOX_UNEQUAL:
        return ProblemSpec(
            name=test.value,
            domain=(-6.0, 6.0),
            diffusion=pme_diffusion(8.0),
            initial=_boxes([(-4.0, -1.0, 1.0), (0.0, 3.0, 1.5)]),
            final_time=0.5,
            a_max=8.0 * 1.5**7,
            **common,
        )
    return ProblemSpec(
        name=test.value,
        domain=(-np.pi, np.pi),
        diffusion=pme_diffusion(8.0),
        initial=_waiting_time_initial,
        final_time=1.8,
        a_max=8.0,
        **common,
    )


def support_edges(u: DGFunction, threshold: float = SUPPORT_THRESHOLD) -> Optional[Tuple[float, float]]:
    """Outer edges of the cells with average above threshold, or None when there are none."""
    inside = np.flatnonzero(u.averages > threshold)
    if inside.size == 0:
        return None
    edges = u.mesh.cell_edges
    return float(edges[inside[0]]), float(edges[inside[-1] + 1])


def support_cells(u: DGFunction, threshold: float = SUPPORT_THRESHOLD) -> Optional[Tuple[int, int]]:
    """Indices of the outermost cells with average above threshold."""
    inside = np.flatnonzero(u.averages > threshold)
    if inside.size == 0:
        return None
    return int(inside[0]), int(inside[-1])
