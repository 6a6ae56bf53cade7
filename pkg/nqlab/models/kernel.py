"""
Admissible summation kernels q on [0, 1].

Kernels are frozen dataclasses and every method is vectorised over t, so a
single kernel may be shared between worker threads.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import comb

from nqlab.core.config import settings
from nqlab.core.errors import DerivativeUnavailable, ParameterOutOfRange


def _output(values: np.ndarray):
    if np.ndim(values) == 0:
        return float(values)
    return values


def falling_product(s: float, order: int) -> float:
    """s (s - 1) ... (s - order), the constant of the order-th derivative of s(1 - t)^(s - 1)."""
    return float(np.prod([s - j for j in range(order + 1)]))


@dataclass(frozen=True)
class Kernel(ABC):
    """
    Base class for kernels q of order alpha.

    Attributes:
        alpha: Method order, alpha >= 0
    """

    alpha: float

    @property
    def k(self) -> int:
        return int(math.floor(self.alpha))

    @property
    @abstractmethod
    def family(self) -> str:
        ...

    @abstractmethod
    def q(self, t):
        """Kernel value q(t)."""

    @abstractmethod
    def q_deriv(self, order: int, t):
        """order-th derivative of q at t."""

    def has_derivative(self, order: int) -> bool:
        return True

    def qk(self, t):
        """Signed k-th derivative (-1)^k q^(k)(t)."""
        return _output((-1) ** self.k * np.asarray(self.q_deriv(self.k, t), dtype=float))

    def power_form(self, order: int) -> Optional[Tuple[float, float]]:
        """
        (coef, exponent) with q^(order)(t) = coef * (1 - t)^exponent, when the
        kernel has that shape.
        """
        return None

    def closed_form_Q(self, t) -> Optional[float]:
        return None

    def closed_form_Qk(self, t) -> Optional[float]:
        return None

    def describe(self) -> dict:
        return {"family": self.family, "alpha": self.alpha}


@dataclass(frozen=True)
class CesaroKernel(Kernel):
    """
    q(t) = (alpha + delta)(1 - t)^(alpha + delta - 1).

    With this kernel the transform reproduces Cesàro means of order
    alpha + delta.
    """

    delta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterOutOfRange("alpha must be >= 0")
        if self.delta <= 0:
            raise ParameterOutOfRange("delta must be > 0")
        if self.alpha + self.delta > self.k + 1:
            raise ParameterOutOfRange(
                f"alpha + delta must be <= floor(alpha) + 1 = {self.k + 1}"
            )

    @property
    def family(self) -> str:
        return "cesaro"

    @property
    def s(self) -> float:
        return self.alpha + self.delta

    def power_form(self, order: int) -> Tuple[float, float]:
        coef = falling_product(self.s, order) * (-1) ** order
        return coef, self.s - order - 1

    def q(self, t):
        return self.q_deriv(0, t)

    def q_deriv(self, order: int, t):
        coef, exponent = self.power_form(order)
        base = np.maximum(1.0 - np.asarray(t, dtype=float), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = coef * np.power(base, exponent)
        return _output(values)

    def closed_form_Q(self, t):
        return _output(np.power(np.asarray(t, dtype=float), self.s))

    def closed_form_Qk(self, t):
        c = falling_product(self.s, self.k)
        gap = self.s - self.k
        return _output(c * np.power(np.asarray(t, dtype=float), gap) / gap)

    def describe(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "delta": self.delta}


@dataclass(frozen=True)
class UserDefinedKernel(Kernel):
    """
    Kernel given by a callable and optional derivative callables.

    derivatives[i] is the (i + 1)-th derivative. Orders without a callable
    are approximated by finite differences when allow_finite_differences is
    set; otherwise DerivativeUnavailable is raised.
    """

    func: Callable = field(default=None, compare=False)
    derivatives: Tuple[Callable, ...] = field(default=(), compare=False)
    allow_finite_differences: bool = False
    name: str = "user"

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterOutOfRange("alpha must be >= 0")
        if self.func is None:
            raise ParameterOutOfRange("user-defined kernel requires a function")

    @property
    def family(self) -> str:
        return "user_defined"

    def has_derivative(self, order: int) -> bool:
        return order == 0 or order <= len(self.derivatives) or self.allow_finite_differences

    def q(self, t):
        return _output(np.asarray(np.vectorize(self.func, otypes=[float])(t), dtype=float))

    def q_deriv(self, order: int, t):
        if order == 0:
            return self.q(t)
        if order <= len(self.derivatives):
            return _output(np.vectorize(self.derivatives[order - 1], otypes=[float])(t))
        if not self.allow_finite_differences:
            raise DerivativeUnavailable(
                f"Kernel '{self.name}' has no derivative of order {order}"
            )
        return _output(np.vectorize(lambda x: self._difference(order, x), otypes=[float])(t))

    def _difference(self, order: int, t: float) -> float:
        # step widened by a decade per extra order to keep roundoff in check
        h = max(settings.FD_STEP_MIN, abs(t) * settings.FD_STEP_REL) * 10 ** (order - 1)
        weights = [(-1) ** i * comb(order, i, exact=True) for i in range(order + 1)]
        span = order * h
        if t - span / 2 < 0:
            nodes = [t + (order - i) * h for i in range(order + 1)]
        elif t + span / 2 > 1:
            nodes = [t - i * h for i in range(order + 1)]
        else:
            nodes = [t + (order / 2 - i) * h for i in range(order + 1)]
        total = sum(w * float(self.func(x)) for w, x in zip(weights, nodes))
        return total / h ** order

    def describe(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "name": self.name}


def _ramp(t):
    return 2.0 * t


def _ramp_slope(t):
    return 2.0 + 0.0 * t


def _parabola(t):
    return 3.0 * (1.0 - t) ** 2


def _parabola_slope(t):
    return -6.0 * (1.0 - t)


# Named user-defined kernels: name -> (q, derivatives)
KERNEL_LIBRARY = {
    "linear_ramp": (_ramp, (_ramp_slope,)),
    "parabola": (_parabola, (_parabola_slope,)),
}
