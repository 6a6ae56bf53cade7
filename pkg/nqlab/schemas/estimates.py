import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


# Lattice of (x, u) points for the S^{i,j} bound check
class SumGrid(BaseModel):
    x_values: List[float]
    u_values: List[float]
    i_values: List[int] = Field(default_factory=lambda: [0, 1, 2])
    j_values: List[int] = Field(default_factory=lambda: [0, 1, 2])

    @field_validator("x_values")
    def x_ascending(cls, v):
        """Validate that x starts at 1 and ascends"""
        if not v or v[0] < 1:
            raise ValueError("x_values must be >= 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("x_values must be ascending")
        return v

    @field_validator("u_values")
    def u_in_period(cls, v):
        """Validate that u lies in (0, pi] and ascends"""
        if not v or v[0] <= 0 or v[-1] > math.pi:
            raise ValueError("u_values must lie in (0, pi]")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("u_values must be ascending")
        return v

    @field_validator("i_values", "j_values")
    def indices_nonnegative(cls, v):
        if any(index < 0 for index in v):
            raise ValueError("indices must be >= 0")
        return sorted(set(v))

    @model_validator(mode="after")
    def spans_both_regimes(self):
        """Validate that some (x, u) pairs fall on each side of u = 1/x"""
        if self.u_values[0] * self.x_values[0] > 1 or self.u_values[-1] * self.x_values[-1] <= 1:
            raise ValueError("grid must span both regimes u <= 1/x and u > 1/x")
        return self


class BoundRow(BaseModel):
    label: str
    x: Optional[float] = None
    u: Optional[float] = None
    w: Optional[float] = None
    t: Optional[float] = None
    lhs: float
    bound: float
    ratio: float


class BoundFitReport(BaseModel):
    estimate: str
    index: Optional[int] = None
    predicted_exponents: Dict[str, float]
    fitted_exponents: Dict[str, float]
    r_squared: Dict[str, float]
    constant: float
    constant_growth: Optional[float] = None
    violation_count: int = 0
    passed: bool
    grid: str
    rows: List[BoundRow] = Field(default_factory=list)
    detail: str = ""

    @property
    def max_exponent_error(self) -> float:
        errors = [
            abs(self.fitted_exponents[key] - predicted)
            for key, predicted in self.predicted_exponents.items()
            if key in self.fitted_exponents
        ]
        return max(errors, default=0.0)


class RepresentationCheck(BaseModel):
    i: int
    w: float
    u: float
    direct: float
    representation: float
    relative_error: float


def _default_w_values() -> List[float]:
    return [2.0 ** (e / 2) for e in range(8, 21)]


def _default_t_values(first: int, last: int) -> List[float]:
    return [math.pi * 2.0 ** -j for j in range(first, last + 1)]


# Grids for the decay estimates of the split u-integrals
class DecayGrids(BaseModel):
    w_values: List[float] = Field(default_factory=_default_w_values)
    short_range_t_values: List[float] = Field(default_factory=lambda: _default_t_values(4, 7))
    long_range_t: float = math.pi / 8
    long_range_octaves: int = 5
    tail_t_values: List[float] = Field(default_factory=lambda: _default_t_values(3, 5))
    tail_span: float = 8.0
    nodes_per_octave: int = 8

    @field_validator("w_values")
    def w_ascending(cls, v):
        if not v or v[0] < 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("w_values must be >= 1 and ascending")
        return v

    @field_validator("short_range_t_values", "tail_t_values")
    def t_in_period(cls, v):
        if not v or any(not 0 < t < math.pi for t in v):
            raise ValueError("t values must lie in (0, pi)")
        return sorted(v)

    @field_validator("long_range_t")
    def single_t_in_period(cls, v):
        if not 0 < v < math.pi:
            raise ValueError("t values must lie in (0, pi)")
        return v

    @field_validator("long_range_octaves", "nodes_per_octave")
    def positive_count(cls, v):
        if v < 1:
            raise ValueError("counts must be >= 1")
        return v

    @field_validator("tail_span")
    def span_above_one(cls, v):
        if v <= 1:
            raise ValueError("tail_span must be > 1")
        return v
