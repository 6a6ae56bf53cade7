"""
Series sources: generators of the terms u_n of an infinite series.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Sequence

import numpy as np

from nqlab.core.errors import ParameterOutOfRange


class SeriesKind(str, Enum):
    EXPLICIT_LIST = "explicit_list"
    RULE_BASED = "rule_based"
    DERIVED_CONJUGATE = "derived_conjugate"


@dataclass(frozen=True)
class SeriesSource:
    """
    Terms u_n of a series.

    Attributes:
        kind: How the terms are produced
        term: Vectorised map from an integer array n to the terms u_n
        max_n_hint: Largest index with a nonzero term, or -1 when unbounded
        name: Label used in reports
    """

    kind: SeriesKind
    term: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    max_n_hint: int = -1
    name: str = "series"

    def terms(self, n_max: int) -> np.ndarray:
        """u_0 .. u_{n_max} as a float array."""
        n = np.arange(int(n_max) + 1)
        values = np.asarray(self.term(n), dtype=float)
        return np.broadcast_to(values, n.shape).copy()

    def __call__(self, n: int) -> float:
        return float(np.asarray(self.term(np.array([int(n)])), dtype=float)[0])


def explicit_series(values: Sequence[float], name: str = "explicit") -> SeriesSource:
    """Series from a finite list; terms past the list are zero."""
    data = np.asarray(values, dtype=float)

    def term(n):
        n = np.asarray(n)
        padded = np.zeros(n.shape, dtype=float)
        inside = n < data.size
        padded[inside] = data[n[inside]]
        return padded

    return SeriesSource(SeriesKind.EXPLICIT_LIST, term, max_n_hint=max(data.size - 1, 0), name=name)


def _impulse(n):
    return (np.asarray(n) == 0).astype(float)


def _alternating(n):
    return np.where(np.asarray(n) % 2 == 0, 1.0, -1.0)


def _alternating_linear(n):
    return _alternating(n) * np.asarray(n, dtype=float)


def _inverse_square(n):
    n = np.asarray(n, dtype=float)
    safe = np.where(n > 0, n, 1.0)
    return np.where(n > 0, 1.0 / safe ** 2, 0.0)


def _alternating_power(i: float = 0):
    def term(n):
        return _alternating(n) * np.power(np.asarray(n, dtype=float), i)
    return term


def _geometric(ratio: float = 0.5):
    if abs(ratio) >= 1:
        raise ParameterOutOfRange("geometric ratio must satisfy |ratio| < 1")

    def term(n):
        return np.power(float(ratio), np.asarray(n, dtype=float))
    return term


_FIXED_RULES: Dict[str, Callable] = {
    "impulse": _impulse,
    "alternating": _alternating,
    "alternating_linear": _alternating_linear,
    "inverse_square": _inverse_square,
}

_PARAMETRIC_RULES: Dict[str, Callable] = {
    "alternating_power": _alternating_power,
    "geometric": _geometric,
}

SERIES_RULES = sorted(_FIXED_RULES) + sorted(_PARAMETRIC_RULES)


def rule_series(name: str, **params) -> SeriesSource:
    """
    Series from the named rule library.

    Raises:
        ParameterOutOfRange: for unknown rule names or bad parameters
    """
    if name in _FIXED_RULES:
        if params:
            raise ParameterOutOfRange(f"series rule '{name}' takes no parameters")
        term = _FIXED_RULES[name]
    elif name in _PARAMETRIC_RULES:
        try:
            term = _PARAMETRIC_RULES[name](**params)
        except TypeError as e:
            raise ParameterOutOfRange(f"bad parameters for series rule '{name}': {e}") from e
    else:
        raise ParameterOutOfRange(f"unknown function '{name}'")
    hint = 0 if name == "impulse" else -1
    return SeriesSource(SeriesKind.RULE_BASED, term, max_n_hint=hint, name=name)
