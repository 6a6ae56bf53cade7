from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class Verdict(str, Enum):
    CONVERGENT_EVIDENCE = "ConvergentEvidence"
    DIVERGENT_EVIDENCE = "DivergentEvidence"
    INCONCLUSIVE = "Inconclusive"


# Series configuration record: a named rule or an explicit list
class SeriesSpec(BaseModel):
    rule: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def exactly_one_source(self):
        """Validate that the series is given one way"""
        if (self.rule is None) == (self.values is None):
            raise ValueError("series needs exactly one of 'rule' or 'values'")
        return self


class MeanSchedule(BaseModel):
    w_values: List[float]

    @field_validator("w_values")
    def strictly_increasing(cls, v):
        """Validate that the schedule is positive and strictly increasing"""
        if not v:
            raise ValueError("w_values must not be empty")
        if v[0] <= 0:
            raise ValueError("w_values must be > 0")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("w_values must be strictly increasing")
        return v


class MeanPoint(BaseModel):
    w: float
    mean: float


class PartialIntegral(BaseModel):
    W: float
    partial_integral: float
    increment: float


class SummabilityReport(BaseModel):
    A: float
    W_max: float
    points_per_dyad: int
    means: List[MeanPoint]
    abs_partial_integrals: List[PartialIntegral]
    total: float
    fitted_slope: Optional[float] = None
    tail_slope: Optional[float] = None
    verdict: Verdict

    @property
    def dyadic_increments(self) -> List[float]:
        return [p.increment for p in self.abs_partial_integrals]
