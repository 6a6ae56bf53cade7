"""
Fractional integrals of h and numerical checks of the hypotheses of the
two summability theorems.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma

from nqlab.core.concurrency import parallel_map
from nqlab.core.config import settings
from nqlab.core.errors import NonIntegrable, NumericalFailure, ParameterOutOfRange
from nqlab.core.quadrature import integrate_scalar
from nqlab.models.periodic import PeriodicFunction
from nqlab.schemas.fourier import (
    CauchyVerdict,
    DerivedSeriesSpec,
    FractionalIntegralTable,
    H0Estimate,
    HypothesisReport,
    Theorem,
    VariationPartial,
)
from nqlab.services.fourier_service import FourierService

logger = logging.getLogger(__name__)

# Octave bands near u = 0 whose ratio drives the tail extrapolation
_ORIGIN_OCTAVES = (11, 21, 31)
# Band ratios at or above this are treated as non-decaying
_DIVERGENT_RATIO = 1.0 - 1e-6


def default_eps_list(levels: int = 14) -> List[float]:
    return [math.pi * 2.0 ** -j for j in range(1, levels + 1)]


def cauchy_verdict(partials: Sequence[float]):
    """
    Three-valued verdict on a sequence of nondecreasing partial integrals.

    Returns:
        (verdict, relative last increment, last / previous increment)
    """
    values = np.asarray(partials, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        return CauchyVerdict.FAILS, None, None
    total = values[-1]
    if total == 0:
        return CauchyVerdict.HOLDS, 0.0, None
    increments = np.diff(np.concatenate(([0.0], values)))
    relative = float(abs(increments[-1]) / abs(total))
    ratio = None
    if values.size >= 2 and increments[-2] != 0:
        ratio = float(abs(increments[-1]) / abs(increments[-2]))
    if relative >= settings.CAUCHY_THRESHOLD:
        return CauchyVerdict.FAILS, relative, ratio
    if ratio is not None and ratio > settings.CAUCHY_STALL_RATIO:
        return CauchyVerdict.INCONCLUSIVE, relative, ratio
    return CauchyVerdict.HOLDS, relative, ratio


class HypothesisService:
    """
    Service for Riemann-Liouville integrals H_β, normalised h_β and the
    theorem hypothesis checkers.
    """

    def __init__(self, fourier_service: Optional[FourierService] = None):
        self.fourier_service = fourier_service or FourierService()

    def fractional_integral_H(
        self,
        h: Callable[[float], float],
        beta: float,
        t: float,
        tol: Optional[float] = None,
    ) -> float:
        """
        H_β(t) = 1/Γ(β) times the integral of (t - u)^(β - 1) h(u) over (0, t).

        The half [t/2, t] is mapped by u = t(1 - s^(1/β)), which removes the
        endpoint singularity. The half [0, t/2] is integrated on octave bands
        with a geometric tail below t·2^-31.

        Raises:
            ParameterOutOfRange: unless beta > 0 and t > 0
            NonIntegrable: if h is not integrable at 0
            QuadratureFailure: if a panel misses its tolerance
        """
        if not beta > 0:
            raise ParameterOutOfRange("beta must be > 0")
        if not t > 0:
            raise ParameterOutOfRange("t must be > 0")
        epsrel = settings.QUAD_EPSREL if tol is None else tol

        def near(u):
            return (t - u) ** (beta - 1.0) * h(u)

        head = self._origin_head(near, t, epsrel) / gamma(beta)

        def mapped(s):
            return h(t * (1.0 - s ** (1.0 / beta)))

        tail = integrate_scalar(mapped, 0.0, 2.0 ** -beta, epsrel=epsrel)
        return head + t ** beta / gamma(beta + 1.0) * tail

    def h_beta(self, h: Callable[[float], float], beta: float, t: float, tol: Optional[float] = None) -> float:
        """Γ(1 + β) t^(-β) H_β(t); β = 0 returns h(t)."""
        if beta < 0:
            raise ParameterOutOfRange("beta must be >= 0")
        if beta == 0:
            return float(h(t))
        return gamma(1.0 + beta) * t ** -beta * self.fractional_integral_H(h, beta, t, tol)

    def fractional_table(
        self, h: Callable[[float], float], beta: float, t_values: Sequence[float]
    ) -> FractionalIntegralTable:
        t_values = sorted(float(t) for t in t_values)
        values = parallel_map(lambda t: self.fractional_integral_H(h, beta, t), t_values)
        return FractionalIntegralTable(beta=beta, t=t_values, H=values)

    def fractional_derivative(
        self,
        h: Callable[[float], float],
        beta: float,
        beta0: float,
        t: float,
        step_rel: float = 1e-3,
    ) -> float:
        """
        1/Γ(β - β₀) times the integral over (0, t) of (t - u)^(β - β₀ - 1) dH_β₀(u),
        the representation of the derivative of H_β through an inner order
        β₀ < β. H_β₀' is taken by central differences.
        """
        if not 0 < beta0 < beta:
            raise ParameterOutOfRange("requires 0 < beta0 < beta")

        def inner(u):
            return self._difference_quotient(h, beta0, u, step_rel)

        weighted = integrate_scalar(inner, 0.0, t, weight="alg", wvar=(0.0, beta - beta0 - 1.0))
        return weighted / gamma(beta - beta0)

    def derivative_of_H(self, h: Callable[[float], float], beta: float, t: float, step_rel: float = 1e-3) -> float:
        """H_β'(t) by central differences."""
        return self._difference_quotient(h, beta, t, step_rel)

    def check_theorem1(
        self,
        f: PeriodicFunction,
        spec: DerivedSeriesSpec,
        grid: Optional[Sequence[float]] = None,
        eps_list: Optional[Sequence[float]] = None,
    ) -> HypothesisReport:
        """Check H_β(+0) = 0 and the variation integral for β = α - r."""
        if not spec.beta > 0:
            raise ParameterOutOfRange("requires beta = alpha - r > 0")
        h = self.fourier_service.h_callable(f, spec)
        return self.check_theorem1_for_h(h, spec.beta, grid, eps_list)

    def check_theorem1_for_h(
        self,
        h: Callable[[float], float],
        beta: float,
        grid: Optional[Sequence[float]] = None,
        eps_list: Optional[Sequence[float]] = None,
    ) -> HypothesisReport:
        """
        Hypotheses of the first theorem for a given h.

        H_β(+0) is Richardson-extrapolated from H_β on the grid, halving
        towards 0. The variation integral of t^(-β)|H_β'(t)| is integrated
        in log t on a table of H_β with TABLE_POINTS_PER_OCTAVE points per
        octave, H_β' coming from np.gradient.

        Returns:
            HypothesisReport; numerical failures are recorded, not raised
        """
        if not beta > 0:
            raise ParameterOutOfRange("beta must be > 0")
        eps_list = sorted(eps_list or default_eps_list(), reverse=True)
        grid = sorted(grid or [math.pi / 4 * 2.0 ** -j for j in range(0, 12)], reverse=True)
        logger.info(f"Checking first-theorem hypotheses with beta={beta}")

        try:
            h0 = self._zero_limit(h, beta, grid)
            t, H = self._log_table(lambda x: self.fractional_integral_H(h, beta, x), eps_list[-1])
        except NumericalFailure as e:
            logger.warning(f"First-theorem hypotheses fail: {e}")
            return HypothesisReport(
                theorem=Theorem.T1,
                order=beta,
                variation_verdict=CauchyVerdict.FAILS,
                failure=f"{type(e).__name__}: {e}",
            )

        derivative = np.gradient(H, t)
        integrand = t ** -beta * np.abs(derivative)
        partials = self._log_partials(t, integrand, eps_list)
        verdict, relative, ratio = cauchy_verdict([p.value for p in partials])
        logger.info(f"H_beta(+0) ~ {h0.value:.3e}, variation verdict {verdict.value}")
        return HypothesisReport(
            theorem=Theorem.T1,
            order=beta,
            H_beta_at_0plus=h0,
            variation_integral_partials=partials,
            relative_increment=relative,
            increment_ratio=ratio,
            variation_verdict=verdict,
        )

    def check_theorem2(
        self,
        f: PeriodicFunction,
        spec: DerivedSeriesSpec,
        grid: Optional[Sequence[float]] = None,
        eps_list: Optional[Sequence[float]] = None,
    ) -> HypothesisReport:
        """Check the integral of |h_ρ(t)| / t for ρ = α - r - 1."""
        if spec.rho < 0:
            raise ParameterOutOfRange("requires rho = alpha - r - 1 >= 0")
        h = self.fourier_service.h_callable(f, spec)
        return self.check_theorem2_for_h(h, spec.rho, eps_list)

    def check_theorem2_for_h(
        self,
        h: Callable[[float], float],
        rho: float,
        eps_list: Optional[Sequence[float]] = None,
    ) -> HypothesisReport:
        if rho < 0:
            raise ParameterOutOfRange("rho must be >= 0")
        eps_list = sorted(eps_list or default_eps_list(), reverse=True)
        logger.info(f"Checking second-theorem hypothesis with rho={rho}")
        try:
            t, values = self._log_table(lambda x: self.h_beta(h, rho, x), eps_list[-1])
        except NumericalFailure as e:
            logger.warning(f"Second-theorem hypothesis fails: {e}")
            return HypothesisReport(
                theorem=Theorem.T2,
                order=rho,
                variation_verdict=CauchyVerdict.FAILS,
                failure=f"{type(e).__name__}: {e}",
            )

        # |h_ρ(t)| / t dt = |h_ρ(t)| d(log t)
        partials = self._log_partials(t, np.abs(values) / t, eps_list)
        verdict, relative, ratio = cauchy_verdict([p.value for p in partials])
        logger.info(f"Second-theorem verdict {verdict.value}")
        return HypothesisReport(
            theorem=Theorem.T2,
            order=rho,
            variation_integral_partials=partials,
            relative_increment=relative,
            increment_ratio=ratio,
            variation_verdict=verdict,
        )

    def cesaro_order(self, spec: DerivedSeriesSpec, delta: float, theorem: Theorem) -> float:
        """
        Order κ of absolute Cesàro summability given by the Cesàro kernel:
        β + r + δ for the first theorem, ρ + r + 1 + δ for the second.
        """
        if theorem == Theorem.T1:
            return spec.beta + spec.r + delta
        return spec.rho + spec.r + 1 + delta

    def _origin_head(self, integrand: Callable[[float], float], t: float, epsrel: float) -> float:
        """
        Integral of integrand over (0, t/2].

        Three bands are integrated down to t·2^-31; the rest is the geometric
        tail implied by the ratio of the two deepest bands, which is exact
        for power laws u^γ.

        Raises:
            NonIntegrable: if the deepest band does not shrink against the middle one
        """
        top, middle, deepest = _ORIGIN_OCTAVES
        head = integrate_scalar(integrand, t * 2.0 ** -top, t / 2.0, epsrel=epsrel)
        middle_band = integrate_scalar(integrand, t * 2.0 ** -middle, t * 2.0 ** -top, epsrel=epsrel)
        deepest_band = integrate_scalar(integrand, t * 2.0 ** -deepest, t * 2.0 ** -middle, epsrel=epsrel)
        head += middle_band + deepest_band
        if abs(deepest_band) <= settings.QUAD_EPSABS or middle_band == 0:
            return head
        ratio = deepest_band / middle_band
        if abs(ratio) >= _DIVERGENT_RATIO:
            raise NonIntegrable(
                f"Integrand does not settle near 0 (octave integrals {middle_band:.3e}, {deepest_band:.3e})"
            )
        return head + deepest_band * ratio / (1.0 - ratio)

    def _zero_limit(self, h, beta, grid) -> H0Estimate:
        """Richardson extrapolation to t = 0, the order taken from the last three samples."""
        samples = [self.fractional_integral_H(h, beta, t) for t in grid]
        x0, x1, x2 = samples[-3:]
        limit = x2
        if x2 != x1:
            # 2^p for H(t) ≈ H(0) + c·t^p on a halving grid
            factor = (x1 - x0) / (x2 - x1)
            if factor > 1.0:
                limit = x2 - (x1 - x2) / (factor - 1.0)
        holds = abs(limit) < settings.H0_TOLERANCE or abs(x2) < settings.H0_TOLERANCE
        return H0Estimate(value=limit, error=abs(limit - x2), samples=samples, holds=bool(holds))

    def _log_table(self, func, t_min):
        octaves = math.log2(math.pi / t_min)
        count = int(round(octaves * settings.TABLE_POINTS_PER_OCTAVE)) + 1
        t = np.geomspace(t_min, math.pi, count)
        values = np.asarray(parallel_map(func, t.tolist()), dtype=float)
        return t, values

    def _log_partials(self, t, integrand, eps_list) -> List[VariationPartial]:
        """Integrals of integrand dt over [eps, π], by the trapezoid rule in log t."""
        log_t = np.log(t)
        weighted = integrand * t
        partials = []
        for eps in eps_list:
            start = int(np.argmin(np.abs(t - eps)))
            value = integrate.trapezoid(weighted[start:], log_t[start:]) if start < t.size - 1 else 0.0
            partials.append(VariationPartial(eps=eps, value=float(value)))
        return partials

    def _difference_quotient(self, h, beta, t, step_rel) -> float:
        step = step_rel * t if t > 0 else step_rel ** 2

        def H(x):
            return self.fractional_integral_H(h, beta, x, tol=1e-11) if x > 0 else 0.0

        if t - step <= 0:
            return (H(t + step) - H(t)) / step
        return (H(t + step) - H(t - step)) / (2.0 * step)
