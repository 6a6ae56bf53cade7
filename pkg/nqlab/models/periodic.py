"""
2π-periodic functions and the named function library.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from nqlab.core.errors import ParameterOutOfRange
from nqlab.core.plugins import is_plugin_reference, load_callable

TWO_PI = 2.0 * math.pi


def wrap(t):
    """Reduce t to [-π, π)."""
    return np.mod(np.asarray(t, dtype=float) + math.pi, TWO_PI) - math.pi


@dataclass(frozen=True)
class PeriodicFunction:
    """
    A 2π-periodic real function.

    Attributes:
        name: Library name or plug-in reference
        base: Vectorised function on [-π, π)
        derivative_rule: Optional (order, t) -> value giving analytic derivatives
        breakpoints: Points in [-π, π) where the function or a derivative jumps
    """

    name: str
    base: Callable = field(compare=False)
    derivative_rule: Optional[Callable] = field(default=None, compare=False)
    breakpoints: Tuple[float, ...] = ()

    def eval(self, t):
        values = np.asarray(self.base(wrap(t)), dtype=float)
        return float(values) if values.ndim == 0 else values

    def __call__(self, t):
        return self.eval(t)

    def derivative(self, order: int, t: float) -> float:
        """
        order-th derivative at t, analytic when available and a central
        difference otherwise.
        """
        if order == 0:
            return float(self.eval(t))
        if self.derivative_rule is not None:
            return float(self.derivative_rule(order, float(wrap(t))))
        h = np.finfo(float).eps ** (1.0 / (order + 2))
        nodes = t + (order / 2.0 - np.arange(order + 1)) * h
        weights = np.array([(-1) ** i * comb(order, i, exact=True) for i in range(order + 1)])
        return float(np.dot(weights, self.eval(nodes)) / h ** order)


def trig_polynomial(a: Sequence[float], b: Sequence[float], name: str = "trig_poly") -> PeriodicFunction:
    """
    a[0]/2 + sum of a[n] cos nt + b[n] sin nt; b[0] is ignored.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    size = max(a.size, b.size)
    a = np.pad(a, (0, size - a.size))
    b = np.pad(b, (0, size - b.size))
    n = np.arange(size)

    def base(t):
        t = np.asarray(t, dtype=float)
        phase = np.multiply.outer(t, n)
        return 0.5 * a[0] + (np.cos(phase[..., 1:]) @ a[1:]) + (np.sin(phase[..., 1:]) @ b[1:])

    def derivative_rule(order, t):
        shift = order * math.pi / 2
        k = n[1:]
        terms = k ** float(order) * (a[1:] * np.cos(k * t + shift) + b[1:] * np.sin(k * t + shift))
        return float(np.sum(terms))

    return PeriodicFunction(name, base, derivative_rule)


def _sine_rule(order, t):
    return math.sin(t + order * math.pi / 2)


def _cosine_rule(order, t):
    return math.cos(t + order * math.pi / 2)


def _sawtooth(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= -math.pi, 0.0, t)


def _sawtooth_rule(order, t):
    return 1.0 if order == 1 else 0.0


def _square(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= -math.pi, 0.0, np.sign(t))


def _flat_rule(order, t):
    return 0.0


def _abs(t):
    return np.abs(t)


def _abs_rule(order, t):
    return float(np.sign(t)) if order == 1 else 0.0


def sawtooth_partial(N: int) -> PeriodicFunction:
    """Sawtooth Fourier series truncated at order N."""
    if N < 1:
        raise ParameterOutOfRange("N must be >= 1")
    n = np.arange(N + 1)
    b = np.zeros(N + 1)
    b[1:] = 2.0 * (-1.0) ** (n[1:] + 1) / n[1:]
    return trig_polynomial(np.zeros(N + 1), b, name=f"sawtooth_partial({N})")


FUNCTION_NAMES = ("sin", "cos", "sawtooth", "square", "abs", "trig_poly", "sawtooth_partial")


def make_function(name: str, **params) -> PeriodicFunction:
    """
    Resolve a library name, or a "package.module:callable" plug-in, to a
    PeriodicFunction.

    Raises:
        ParameterOutOfRange: for unknown names or bad parameters
    """
    if name == "sin":
        return PeriodicFunction("sin", np.sin, _sine_rule)
    if name == "cos":
        return PeriodicFunction("cos", np.cos, _cosine_rule)
    if name == "sawtooth":
        return PeriodicFunction("sawtooth", _sawtooth, _sawtooth_rule, breakpoints=(-math.pi,))
    if name == "square":
        return PeriodicFunction("square", _square, _flat_rule, breakpoints=(-math.pi, 0.0))
    if name == "abs":
        return PeriodicFunction("abs", _abs, _abs_rule, breakpoints=(-math.pi, 0.0))
    if name == "trig_poly":
        return trig_polynomial(params.get("a", [0.0]), params.get("b", [0.0]))
    if name == "sawtooth_partial":
        return sawtooth_partial(int(params.get("N", 16)))
    if is_plugin_reference(name):
        func = load_callable(name)
        return PeriodicFunction(name, np.vectorize(func, otypes=[float]))
    raise ParameterOutOfRange(f"unknown function '{name}'")
