"""Cell-average preserving positivity limiter."""
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from errors import NegativeCellAverageError
from fem import NONLINEAR_POINTS, DGFunction, gauss_quadrature, legendre_table

# Undershoot of a cell average below the floor, relative to max |average|,
# that still counts as round-off in a vacuum cell.
VACUUM_TOLERANCE = 1e-4
# Margin, relative to the sum of |coefficients|, before a cell counts as violating the floor.
TRIGGER_MARGIN = 1e-14


class LimiterConfig(BaseModel):
    """Where positivity is checked and against which floor."""

    model_config = ConfigDict(frozen=True)

    floor: float = Field(default=0.0, ge=0.0)
    enabled: bool = True
    n_points: int = Field(default=NONLINEAR_POINTS, ge=1, le=20)
    vacuum_tolerance: float = Field(default=VACUUM_TOLERANCE, ge=0.0)

    def check_points(self) -> np.ndarray:
        """Gauss nodes plus both cell endpoints on [-1, 1]."""
        nodes = gauss_quadrature(self.n_points).nodes
        return np.concatenate(([-1.0], nodes, [1.0]))


def check_point_values(u: DGFunction, cfg: LimiterConfig) -> np.ndarray:
    return u.coeffs @ legendre_table(u.degree, cfg.check_points()).T


def flatten_vacuum(u: DGFunction, cfg: LimiterConfig) -> DGFunction:
    """Reset cells whose average undershoots the floor by round-off to the constant floor.

    Raises:
        NegativeCellAverageError: an average lies below the floor by more than
            cfg.vacuum_tolerance * max |average|
    """
    averages = u.coeffs[:, 0]
    below = averages < cfg.floor
    if not np.any(below):
        return u
    scale = max(float(np.abs(averages).max()), cfg.floor)
    slack = cfg.vacuum_tolerance * scale
    negative = averages < cfg.floor - slack
    if np.any(negative):
        cell = int(np.argmax(negative))
        raise NegativeCellAverageError(cell, float(averages[cell]), cfg.floor)

    coeffs = u.coeffs.copy()
    coeffs[below, 0] = cfg.floor
    coeffs[below, 1:] = 0.0
    defect = float(np.sum((cfg.floor - averages[below]) * u.mesh.widths[below]))
    logger.debug(f"Flattened {int(below.sum())} vacuum cells, mass added {defect:.3e}")
    return u.with_coeffs(coeffs)


def apply_positivity(u: DGFunction, cfg: LimiterConfig = LimiterConfig()) -> DGFunction:
    """Scale higher modes toward the cell average so every check point is >= floor.

    theta_j = min(1, (avg_j - floor) / (avg_j - min_j)); coefficient 0 is only
    touched in vacuum cells whose average sits below the floor by round-off.

    Args:
        u: solution to limit
        cfg: floor, check points and vacuum tolerance

    Returns:
        Limited copy of u (u itself when nothing needed limiting)

    Raises:
        NegativeCellAverageError: a cell average lies clearly below the floor
    """
    if not cfg.enabled:
        return u
    u = flatten_vacuum(u, cfg)
    if u.degree == 0:
        return u
    averages = u.coeffs[:, 0]
    minima = check_point_values(u, cfg).min(axis=1)
    margin = TRIGGER_MARGIN * np.maximum(1.0, np.abs(u.coeffs).sum(axis=1))
    violating = minima < cfg.floor - margin
    if not np.any(violating):
        return u

    coeffs = u.coeffs.copy()
    excess = averages[violating] - cfg.floor
    spread = averages[violating] - minima[violating]
    theta = np.where(excess > 0.0, np.minimum(1.0, excess / spread), 0.0)
    coeffs[violating, 1:] *= theta[:, None]
    logger.debug(f"Positivity limiter scaled {int(violating.sum())} cells, min theta {theta.min():.3e}")
    return u.with_coeffs(coeffs)
