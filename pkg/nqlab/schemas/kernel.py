import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class KernelFamily(str, Enum):
    CESARO = "cesaro"
    USER_DEFINED = "user_defined"


# Kernel configuration record
class KernelSpec(BaseModel):
    family: KernelFamily = KernelFamily.CESARO
    alpha: float
    delta: Optional[float] = None
    function: Optional[str] = None
    derivatives: List[str] = Field(default_factory=list)
    allow_finite_differences: bool = False

    @property
    def k(self) -> int:
        return int(math.floor(self.alpha))

    @field_validator("alpha")
    def alpha_must_be_nonnegative(cls, v):
        """Validate the method order"""
        if v < 0:
            raise ValueError("alpha must be >= 0")
        return v

    @model_validator(mode="after")
    def family_parameters(self):
        """Validate the parameters each family needs"""
        if self.family == KernelFamily.CESARO:
            if self.delta is None or self.delta <= 0:
                raise ValueError("delta must be > 0")
            if self.alpha + self.delta > self.k + 1:
                raise ValueError(f"alpha + delta must be <= floor(alpha) + 1 = {self.k + 1}")
        elif not self.function:
            raise ValueError("user_defined kernel requires 'function'")
        return self


# One Definition-style condition
class ConditionResult(BaseModel):
    condition: int
    name: str
    passed: bool
    witness: Optional[float] = None
    value: Optional[float] = None
    detail: str = ""


class AdmissibilityReport(BaseModel):
    kernel: dict
    conditions: List[ConditionResult]
    t_grid: List[float]
    tol: float
    condition7_coarse_sup: Optional[float] = None
    condition7_refined_sup: Optional[float] = None
    derivative_sups: List[float] = Field(default_factory=list)
    kth_derivative_l1: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, number: int) -> ConditionResult:
        return next(c for c in self.conditions if c.condition == number)


class TailIntegralReport(BaseModel):
    levels: List[int]
    partials: List[float]
    increments: List[float]
    ratios: List[float]
    passed: bool
