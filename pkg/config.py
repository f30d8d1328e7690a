"""Configuration management for the EIN-LDG solver."""
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values, load_dotenv
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from errors import ConfigurationError

# Load environment variables
load_dotenv()

# Matched (degree, order) pairs: spatial and temporal accuracy agree.
ORDER_FOR_DEGREE = {0: 1, 1: 2, 2: 3}
DEGREE_FOR_ORDER = {order: k for k, order in ORDER_FOR_DEGREE.items()}


def _env_flag(name: str, default: str = "0") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


class Settings(BaseModel):
    """Process-wide settings."""

    # Paths
    output_dir: Path = Field(default_factory=lambda: Path(os.getenv("EINLDG_OUTPUT_DIR", "results")))
    logs_dir: Path = Field(default_factory=lambda: Path(os.getenv("EINLDG_LOGS_DIR", "logs")))

    # Logging
    log_level: str = Field(default_factory=lambda: os.getenv("EINLDG_LOG_LEVEL", "INFO"))

    # Numerics
    check_residuals: bool = Field(default_factory=lambda: _env_flag("EINLDG_CHECK_RESIDUALS"))
    workers: int = Field(default_factory=lambda: int(os.getenv("EINLDG_WORKERS", "1")))

    def ensure_dirs(self):
        """Create output and log directories if they don't exist."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logs_dir.mkdir(parents=True, exist_ok=True)


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class RunConfig(BaseModel):
    """One experiment: problem, meshes, scheme and outputs."""

    experiment: str
    cells: List[int] = Field(default_factory=lambda: [80, 160, 320, 640, 1280])
    degree: Optional[int] = Field(default=None, ge=0, le=5)
    order: Optional[int] = Field(default=None, ge=1, le=3)

    # a0: fixed value, or adaptive with a safety factor on max a(u)
    a0: Optional[float] = Field(default=None, gt=0.0)
    a0_safety: Optional[float] = Field(default=None, ge=0.5)
    a0_refresh: int = Field(default=100, ge=1)
    a0_values: List[float] = Field(default_factory=list)

    # dt = dt_factor * h unless a fixed dt is given
    dt: Optional[float] = Field(default=None, gt=0.0)
    dt_factor: float = Field(default=1.0, gt=0.0)
    final_time: Optional[float] = Field(default=None, gt=0.0)

    output_dir: Optional[Path] = None
    snapshot_times: List[float] = Field(default_factory=list)
    samples_per_cell: int = Field(default=3, ge=1)

    # Problem parameters
    b: float = Field(default=10.0, ge=0.0)
    m: float = Field(default=2.0, gt=1.0)
    v_bias: float = 1.5

    limiter: Optional[bool] = None
    max_steps: int = Field(default=200_000, ge=1)
    steady_tol: float = Field(default=1e-6, gt=0.0)
    explicit_reference: bool = False
    workers: int = Field(default=1, ge=1)

    @field_validator("cells", "a0_values", "snapshot_times", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    @field_validator("cells")
    @classmethod
    def positive_cells(cls, value: List[int]) -> List[int]:
        if not value or any(n < 1 for n in value):
            raise ValueError("cells must be a non-empty list of positive integers")
        return value

    @model_validator(mode="after")
    def pair_degree_and_order(self) -> "RunConfig":
        # object.__setattr__ keeps filled-in values out of model_fields_set
        if self.degree is None and self.order is None:
            object.__setattr__(self, "degree", 0)
            object.__setattr__(self, "order", 1)
        elif self.order is None:
            object.__setattr__(self, "order", ORDER_FOR_DEGREE.get(self.degree, 3))
        elif self.degree is None:
            object.__setattr__(self, "degree", DEGREE_FOR_ORDER[self.order])
        elif ORDER_FOR_DEGREE.get(self.degree) != self.order:
            logger.warning(
                f"Degree k={self.degree} paired with time order {self.order}; "
                "space and time accuracy will not match"
            )
        return self

    @property
    def adaptive_a0(self) -> bool:
        return self.a0 is None


def load_run_config(
    path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
    defaults: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Read a flat key=value file and apply command-line overrides.

    Args:
        path: config file (python-dotenv syntax), optional
        overrides: values from the command line; None entries are ignored
        defaults: fallbacks for keys neither the file nor the overrides set

    Returns:
        Validated RunConfig
    """
    values: Dict[str, Any] = dict(defaults or {})
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        values.update({key.lower(): value for key, value in dotenv_values(path).items() if value is not None})
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    values.setdefault("workers", config.workers)
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run configuration: {e}") from e


# Global settings instance
config = Settings()
