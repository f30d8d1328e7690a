"""Exception hierarchy for the EIN-LDG solver."""
from typing import Optional


class EinLdgError(Exception):
    """Base class for every solver error."""


class ConfigurationError(EinLdgError, ValueError):
    """Invalid run configuration or invalid construction arguments."""


class MeshMismatchError(EinLdgError, ValueError):
    """Two DG functions do not live on the same mesh/degree."""


class BoundaryTraceError(EinLdgError):
    """An outside trace was requested at a Dirichlet boundary."""


class SingularSystemError(EinLdgError):
    """A linear system could not be factorized."""


class NegativeCellAverageError(EinLdgError):
    """A cell average fell below the limiter floor beyond round-off; scaling cannot repair it."""

    def __init__(self, cell: int, value: float, floor: float = 0.0):
        self.cell = cell
        self.value = value
        self.floor = floor
        super().__init__(
            f"cell {cell} has average {value:.6e} below floor {floor:.3e}"
        )


class SolverBlowupError(EinLdgError):
    """The march produced non-finite or exploding values."""

    def __init__(self, step: int, time: float, norm: float, reason: Optional[str] = None):
        self.step = step
        self.time = time
        self.norm = norm
        message = f"blow-up at step {step} (t={time:.6g}, |u|={norm:.3e})"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class SteadyStateNotReachedError(EinLdgError):
    """The steady-state criterion was not met within the step budget."""

    def __init__(self, steps: int, time: float, last_change: float):
        self.steps = steps
        self.time = time
        self.last_change = last_change
        super().__init__(
            f"no steady state after {steps} steps (t={time:.6g}, last L1 change {last_change:.3e})"
        )
