"""Manufactured-solution problems with exact solution sin(x - t) on [-pi, pi]."""
from enum import Enum
from typing import Dict, Tuple

import numpy as np
import sympy as sp

from errors import ConfigurationError
from ldg import SolutionDiffusion, SpatialDiffusion
from problems.base import U, X, T, ProblemSpec, check_manufactured, manufacture

DOMAIN = (-np.pi, np.pi)
FINAL_TIME = 10.0
EXACT = sp.sin(X - T)

# (b, order) -> (a0, dt / h) for the variable-coefficient problem.
EXAMPLE2_PRESETS: Dict[Tuple[float, int], Tuple[float, float]] = {
    (10.0, 1): (6.0, 0.1),
    (10.0, 2): (6.0, 0.1),
    (10.0, 3): (6.0, 0.1),
    (100.0, 1): (51.0, 0.1),
    (100.0, 2): (51.0, 0.1),
    (100.0, 3): (55.0, 0.05),
    (1000.0, 1): (501.0, 0.01),
    (1000.0, 2): (501.0, 0.01),
    (1000.0, 3): (540.0, 0.01),
}


class Example1Case(str, Enum):
    CONST_HALF = "const-half"
    QUADRATIC = "quadratic"
    SINE_SQUARED = "sine-squared"


def _const_half() -> SolutionDiffusion:
    root = np.sqrt(0.5)
    return SolutionDiffusion(
        a=lambda u: np.full_like(np.asarray(u, dtype=float), 0.5),
        b=lambda u: np.full_like(np.asarray(u, dtype=float), root),
        B=lambda u: root * np.asarray(u, dtype=float),
    )


def _quadratic() -> SolutionDiffusion:
    return SolutionDiffusion(
        a=lambda u: np.asarray(u) ** 2 + 1.0,
        b=lambda u: np.sqrt(np.asarray(u) ** 2 + 1.0),
        B=lambda u: 0.5 * (u * np.sqrt(np.asarray(u) ** 2 + 1.0) + np.arcsinh(u)),
    )


def _sine_squared_antiderivative(u):
    """int_0^u |sin s| ds."""
    u = np.asarray(u, dtype=float)
    periods = np.floor(u / np.pi)
    return 2.0 * periods + 1.0 - np.cos(u - np.pi * periods)


def _sine_squared() -> SolutionDiffusion:
    return SolutionDiffusion(
        a=lambda u: np.sin(u) ** 2,
        b=lambda u: np.abs(np.sin(u)),
        B=_sine_squared_antiderivative,
    )


EXAMPLE1 = {
    Example1Case.CONST_HALF: (sp.Rational(1, 2), _const_half, 0.5),
    Example1Case.QUADRATIC: (U**2 + 1, _quadratic, 2.0),
    Example1Case.SINE_SQUARED: (sp.sin(U) ** 2, _sine_squared, float(np.sin(1.0) ** 2)),
}


def example1(case: Example1Case) -> ProblemSpec:
    """Solution-dependent diffusion a(u) with a symbolically derived source."""
    case = Example1Case(case)
    coefficient, diffusion, a_max = EXAMPLE1[case]
    manufactured = manufacture(coefficient, EXACT)
    check_manufactured(f"example1-{case.value}", manufactured, DOMAIN, (0.0, FINAL_TIME))
    return ProblemSpec(
        name=f"example1-{case.value}",
        domain=DOMAIN,
        diffusion=diffusion(),
        initial=lambda x: manufactured.exact(x, 0.0),
        final_time=FINAL_TIME,
        source=manufactured.source,
        exact=manufactured.exact,
        a_max=a_max,
        defaults=dict(dt_factor=1.0, fixed_a0=True),
    )


def example2(b: float, order: int = 3) -> ProblemSpec:
    """Space-dependent diffusion a(x) = 1 + b sin^2 x."""
    if b < 0:
        raise ConfigurationError(f"b must be non-negative, got {b}")
    manufactured = manufacture(1 + sp.Float(b) * sp.sin(X) ** 2, EXACT)
    check_manufactured(f"example2-b{b:g}", manufactured, DOMAIN, (0.0, FINAL_TIME))
    a0, dt_factor = EXAMPLE2_PRESETS.get((float(b), order), (0.5 * (1.0 + b), 0.1))
    return ProblemSpec(
        name=f"example2-b{b:g}",
        domain=DOMAIN,
        diffusion=SpatialDiffusion(lambda x: 1.0 + b * np.sin(x) ** 2),
        initial=lambda x: manufactured.exact(x, 0.0),
        final_time=FINAL_TIME,
        source=manufactured.source,
        exact=manufactured.exact,
        a_max=1.0 + b,
        defaults=dict(dt_factor=dt_factor, a0=a0, degree=order - 1, order=order),
    )


def linear_heat(a: float = 0.5, final_time: float = 1.0) -> ProblemSpec:
    """U_t = a U_xx, periodic on [-pi, pi], exact exp(-a t) sin x."""
    if a <= 0:
        raise ConfigurationError(f"diffusion must be positive, got {a}")
    root = np.sqrt(a)
    return ProblemSpec(
        name=f"heat-a{a:g}",
        domain=DOMAIN,
        diffusion=SolutionDiffusion(
            a=lambda u: np.full_like(np.asarray(u, dtype=float), a),
            b=lambda u: np.full_like(np.asarray(u, dtype=float), root),
            B=lambda u: root * np.asarray(u, dtype=float),
        ),
        initial=np.sin,
        final_time=final_time,
        exact=lambda x, t: np.exp(-a * t) * np.sin(x),
        a_max=a,
        defaults=dict(dt_factor=1.0, fixed_a0=True),
    )
