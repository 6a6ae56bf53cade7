import math
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class Theorem(str, Enum):
    T1 = "T1"
    T2 = "T2"


class CauchyVerdict(str, Enum):
    HOLDS = "holds"
    INCONCLUSIVE = "inconclusive"
    FAILS = "fails"


# Periodic function reference: library name or "package.module:callable"
class FunctionSpec(BaseModel):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


# Evaluation point, order and correction constants of a derived series
class DerivedSeriesSpec(BaseModel):
    x: float = 0.0
    r: int
    alpha: float
    theta: Optional[List[float]] = None

    @field_validator("r")
    def r_must_be_positive(cls, v):
        """Validate the derivative order"""
        if v < 1:
            raise ValueError("r must be >= 1")
        return v

    @model_validator(mode="after")
    def order_below_alpha(self):
        """Validate r < alpha and the length of theta"""
        if not self.r < self.alpha:
            raise ValueError("requires r < alpha")
        if self.theta is not None and len(self.theta) != self.r:
            raise ValueError(f"theta must have length r = {self.r}")
        return self

    @property
    def beta(self) -> float:
        return self.alpha - self.r

    @property
    def rho(self) -> float:
        return self.alpha - self.r - 1


class FractionalIntegralTable(BaseModel):
    beta: float
    t: List[float]
    H: List[float]
    interpolation: str = "linear in log t"

    @field_validator("t")
    def increasing_in_range(cls, v):
        """Validate that samples increase inside (0, π]"""
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("t values must be strictly increasing")
        if v and (v[0] <= 0 or v[-1] > math.pi * (1 + 1e-12)):
            raise ValueError("t values must lie in (0, π]")
        return v

    def interpolate(self, t: float) -> float:
        return float(np.interp(math.log(t), np.log(self.t), self.H))


class H0Estimate(BaseModel):
    value: float
    error: float
    samples: List[float]
    holds: bool


class VariationPartial(BaseModel):
    eps: float
    value: float


class HypothesisReport(BaseModel):
    theorem: Theorem
    order: float
    H_beta_at_0plus: Optional[H0Estimate] = None
    variation_integral_partials: List[VariationPartial] = Field(default_factory=list)
    relative_increment: Optional[float] = None
    increment_ratio: Optional[float] = None
    variation_verdict: CauchyVerdict
    failure: Optional[str] = None

    @property
    def hypotheses_hold(self) -> bool:
        """True when every hypothesis of the theorem is verified."""
        zero_limit = self.H_beta_at_0plus is None or self.H_beta_at_0plus.holds
        return zero_limit and self.variation_verdict == CauchyVerdict.HOLDS


class SplitTerm(BaseModel):
    n: int
    alpha_n: float
    beta_n: float
    derived_term: Optional[float] = None
    deviation: Optional[float] = None
