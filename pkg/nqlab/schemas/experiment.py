import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from nqlab.schemas.estimates import DecayGrids
from nqlab.schemas.fourier import DerivedSeriesSpec, FunctionSpec
from nqlab.schemas.kernel import KernelFamily, KernelSpec
from nqlab.schemas.transform import SeriesSpec, Verdict


class Command(str, Enum):
    KERNEL_CHECK = "kernel-check"
    MEAN = "mean"
    ABS_DIAGNOSTIC = "abs-diagnostic"
    FOURIER_EXPERIMENT = "fourier-experiment"
    LEMMA_VERIFY = "lemma-verify"


class Estimate(str, Enum):
    SUM_BOUNDS = "sum_bounds"
    REPRESENTATION = "representation"
    ALT_SUM_BOUND = "alt_sum_bound"
    ALT_SUM_SATURATION = "alt_sum_saturation"
    NEAR_DECAY = "near_decay"
    FAR_DECAY = "far_decay"
    SHORT_RANGE_AVERAGE = "short_range_average"
    LONG_RANGE = "long_range"
    TAIL_AVERAGE = "tail_average"
    RIESZ_IDENTITY = "riesz_identity"


DECAY = {
    Estimate.NEAR_DECAY,
    Estimate.FAR_DECAY,
    Estimate.SHORT_RANGE_AVERAGE,
    Estimate.LONG_RANGE,
    Estimate.TAIL_AVERAGE,
}
KERNEL_FREE = {Estimate.SUM_BOUNDS, Estimate.RIESZ_IDENTITY}


# Finite Dirichlet series for the Riesz-mean identity check
class RieszInstance(BaseModel):
    lam: List[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0])
    a: List[float] = Field(default_factory=lambda: [2.0, -1.0, 4.0])
    x: float = 2.5
    step: float = 1e-4
    k_values: List[int] = Field(default_factory=lambda: [1, 2])

    @field_validator("k_values")
    def positive_orders(cls, v):
        if not v or any(k < 1 for k in v):
            raise ValueError("k_values must be positive integers")
        return v

    @field_validator("step")
    def positive_step(cls, v):
        if v <= 0:
            raise ValueError("step must be > 0")
        return v

    @model_validator(mode="after")
    def matching_lengths(self):
        if len(self.lam) != len(self.a):
            raise ValueError("lam and a must have equal length")
        return self


# One experiment document, as read from --config
class ExperimentConfig(BaseModel):
    command: Command
    kernel: Optional[KernelSpec] = None
    series: Optional[SeriesSpec] = None
    function: Optional[FunctionSpec] = None
    derived: Optional[DerivedSeriesSpec] = None

    # Schedules and grids
    w_values: Optional[List[float]] = None
    u_values: Optional[List[float]] = None
    x_values: Optional[List[float]] = None
    t_grid: Optional[List[float]] = None
    eps_list: Optional[List[float]] = None
    A: Optional[float] = None
    W_max: float = 2.0 ** 12
    points_per_dyad: int = 16
    decay_grids: Optional[DecayGrids] = None

    # Fourier experiment
    N: int = 16
    n_max: int = 20
    quad_nodes: Optional[int] = None
    beta_method: str = "closed_form"

    # Estimate verification
    estimates: List[Estimate] = Field(default_factory=list)
    r: Optional[int] = None
    p: int = 0
    i_values: Optional[List[int]] = None
    riesz: RieszInstance = Field(default_factory=RieszInstance)

    # Expectations turn informational results into checks
    expect_sum: Optional[float] = None
    expect_verdict: Optional[Verdict] = None
    expect_hypotheses: Optional[bool] = None

    out: Optional[str] = None
    tolerance: Optional[float] = None
    seed: int = 0
    jitter: bool = False

    @field_validator("W_max")
    def positive_limit(cls, v):
        if v <= 0:
            raise ValueError("W_max must be > 0")
        return v

    @field_validator("tolerance")
    def positive_tolerance(cls, v):
        if v is not None and v <= 0:
            raise ValueError("tolerance must be > 0")
        return v

    @field_validator("t_grid")
    def inside_unit_interval(cls, v):
        if v is not None and (not v or min(v) <= 0 or max(v) >= 1):
            raise ValueError("t_grid must be a nonempty subset of (0, 1)")
        return v

    @field_validator("u_values")
    def inside_period(cls, v):
        if v is not None and (not v or min(v) <= 0 or max(v) > math.pi):
            raise ValueError("u_values must lie in (0, pi]")
        return v

    @field_validator("w_values", "x_values")
    def increasing_positive(cls, v):
        """Validate that schedules are positive and strictly increasing"""
        if v is None:
            return v
        if not v or v[0] <= 0:
            raise ValueError("schedule values must be > 0")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("schedule values must be strictly increasing")
        return v

    @field_validator("beta_method")
    def known_beta_method(cls, v):
        if v not in ("closed_form", "quadrature"):
            raise ValueError("beta_method must be 'closed_form' or 'quadrature'")
        return v

    @field_validator("N", "n_max", "points_per_dyad")
    def positive_count(cls, v):
        if v < 1:
            raise ValueError("counts must be >= 1")
        return v

    @model_validator(mode="after")
    def command_inputs(self):
        """Validate that the command has the inputs it needs"""
        if self.command == Command.KERNEL_CHECK:
            self._require("kernel")
        elif self.command == Command.MEAN:
            self._require("kernel", "series", "w_values")
        elif self.command == Command.ABS_DIAGNOSTIC:
            self._require("kernel", "series")
        elif self.command == Command.FOURIER_EXPERIMENT:
            self._require("function", "derived")
            if self.kernel is not None and self.kernel.alpha != self.derived.alpha:
                raise ValueError("kernel alpha must equal derived alpha")
        else:
            self._check_estimates()
        return self

    def _require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.command.value} requires {', '.join(missing)}")

    def _check_estimates(self) -> None:
        if not self.estimates:
            raise ValueError("lemma-verify requires at least one estimate")
        if any(e not in KERNEL_FREE for e in self.estimates):
            self._require("kernel")
        needs_r = [e for e in self.estimates if e in DECAY or e == Estimate.REPRESENTATION]
        if not needs_r:
            return
        self._require("r")
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if any(e in DECAY for e in needs_r) and not self.r < self.kernel.alpha:
            raise ValueError("requires r < alpha")
        if self.r > self.kernel.k:
            raise ValueError(f"r must lie in [0, k={self.kernel.k}]")

    @property
    def cesaro_delta(self) -> Optional[float]:
        if self.kernel is None or self.kernel.family != KernelFamily.CESARO:
            return None
        return self.kernel.delta


class CheckResult(BaseModel):
    name: str
    passed: Optional[bool] = None
    value: Optional[float] = None
    limit: Optional[float] = None
    detail: str = ""
    artifact: Optional[str] = None


class RunManifest(BaseModel):
    tool: str
    version: str
    command: Command
    config: Dict[str, Any]
    seed: int
    wall_time_seconds: float
    checks: List[CheckResult] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)
    exit_code: int
    error: Optional[str] = None

    @property
    def failed_checks(self) -> List[str]:
        return [c.name for c in self.checks if c.passed is False]
