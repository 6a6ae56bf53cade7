"""
The summation transform applied to functions and series, and the
absolute-summability diagnostic.
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np
from scipy import stats

from nqlab.core.concurrency import parallel_map
from nqlab.core.config import settings
from nqlab.core.errors import BudgetExceeded, ParameterOutOfRange
from nqlab.core.quadrature import integrate_scalar
from nqlab.models.kernel import Kernel
from nqlab.models.series import SeriesSource, explicit_series, rule_series
from nqlab.schemas.transform import (
    MeanPoint,
    MeanSchedule,
    PartialIntegral,
    SeriesSpec,
    SummabilityReport,
    Verdict,
)
from nqlab.services.kernel_service import KernelService

logger = logging.getLogger(__name__)

# Midpoint nodes landing on an integer are moved off it by this much.
INTEGER_OFFSET = 1e-9


class TransformService:
    """
    Service for means and absolute-summability diagnostics.
    """

    def __init__(self, kernel_service: Optional[KernelService] = None):
        self.kernel_service = kernel_service or KernelService()

    def series_from_spec(self, spec: SeriesSpec) -> SeriesSource:
        if spec.values is not None:
            return explicit_series(spec.values)
        return rule_series(spec.rule, **spec.params)

    def n_mean_function(self, kernel: Kernel, F: Callable[[float], float], w: float) -> float:
        """
        Integral of q(t) F(w t) over [0, 1].

        Raises:
            ParameterOutOfRange: if w <= 0
            QuadratureFailure: if adaptive refinement does not converge
        """
        self._check_positive(w)
        form = kernel.power_form(0)
        if form is not None and not float(form[1]).is_integer():
            coef, exponent = form
            return integrate_scalar(
                lambda t: coef * F(w * t), 0.0, 1.0, weight="alg", wvar=(0.0, exponent)
            )
        return integrate_scalar(lambda t: kernel.q(t) * F(w * t), 0.0, 1.0)

    def n_mean_series(self, kernel: Kernel, s: SeriesSource, w: float) -> float:
        """
        Sum of u_n Q(1 - n / w) over 0 <= n <= floor(w).
        """
        self._check_positive(w)
        n = np.arange(int(math.floor(w)) + 1)
        weights = self._Q_values(kernel, 1.0 - n / w)
        return math.fsum(s.terms(n[-1]) * weights)

    def means(self, kernel: Kernel, s: SeriesSource, schedule: MeanSchedule) -> List[MeanPoint]:
        return [MeanPoint(w=w, mean=self.n_mean_series(kernel, s, w)) for w in schedule.w_values]

    def abs_integrand(self, kernel: Kernel, s: SeriesSource, w: float) -> float:
        """
        |sum of n u_n q(n / w) over n <= w| / w^2.

        At integer w the n = w term is dropped when q(1) is infinite.
        """
        self._check_positive(w)
        top = int(math.floor(w))
        return self._integrand(kernel, s.terms(max(top, 0)), w, self._singular_at_one(kernel))

    def abs_summability_diagnostic(
        self,
        kernel: Kernel,
        s: SeriesSource,
        A: Optional[float] = None,
        W_max: float = 2.0 ** 12,
        points_per_dyad: int = 16,
    ) -> SummabilityReport:
        """
        Dyadic partial integrals of abs_integrand over [A, W].

        Each dyad is integrated with the composite midpoint rule. The log of
        the dyadic increments is fitted against the dyad index to produce a
        verdict.

        Args:
            kernel: Summation kernel
            s: Series under test
            A: Lower limit (defaults to DEFAULT_A)
            W_max: Upper limit
            points_per_dyad: Midpoint nodes per dyad, at least 8

        Returns:
            SummabilityReport

        Raises:
            BudgetExceeded: if the term evaluations would exceed TERM_EVALUATION_CAP
        """
        A = settings.DEFAULT_A if A is None else A
        if not 0 < A < W_max:
            raise ParameterOutOfRange("requires 0 < A < W_max")
        if points_per_dyad < 8:
            raise ParameterOutOfRange("points_per_dyad must be >= 8")

        edges = self._checkpoints(A, W_max)
        dyads = list(zip(edges[:-1], edges[1:]))
        nodes = [self._midpoints(a, b, points_per_dyad) for a, b in dyads]
        evaluations = int(sum(np.sum(np.floor(x) + 1) for x in nodes))
        if evaluations > settings.TERM_EVALUATION_CAP:
            raise BudgetExceeded(
                f"Diagnostic needs {evaluations} term evaluations, cap is {settings.TERM_EVALUATION_CAP}"
            )
        logger.info(
            f"Absolute-summability diagnostic on [{A}, {W_max}]: {len(dyads)} dyads, "
            f"{evaluations} term evaluations"
        )

        u = s.terms(int(math.floor(W_max)))
        singular = self._singular_at_one(kernel)

        def integrate_dyad(item):
            (a, b), x = item
            values = [self._integrand(kernel, u, w, singular) for w in x]
            return math.fsum(values) * (b - a) / points_per_dyad

        increments = parallel_map(integrate_dyad, list(zip(dyads, nodes)))
        partials, running = [], 0.0
        for (_, b), piece in zip(dyads, increments):
            running += piece
            partials.append(PartialIntegral(W=b, partial_integral=running, increment=piece))

        verdict, slope, tail_slope = self._verdict(increments, running)
        logger.info(f"Diagnostic total {running:.6g}, slope {slope}, verdict {verdict.value}")
        means = [MeanPoint(w=b, mean=self.n_mean_series(kernel, s, b)) for _, b in dyads]
        return SummabilityReport(
            A=A,
            W_max=W_max,
            points_per_dyad=points_per_dyad,
            means=means,
            abs_partial_integrals=partials,
            total=running,
            fitted_slope=slope,
            tail_slope=tail_slope,
            verdict=verdict,
        )

    def _verdict(self, increments: List[float], total: float):
        if total == 0:
            return Verdict.CONVERGENT_EVIDENCE, None, None
        index = np.arange(len(increments), dtype=float)
        values = np.asarray(increments, dtype=float)
        positive = values > 0
        if positive.sum() < 3:
            return Verdict.INCONCLUSIVE, None, None

        slope = float(stats.linregress(index[positive], np.log(values[positive])).slope)
        tail = positive.copy()
        tail[:-4] = False
        tail_slope = None
        if tail.sum() >= 2:
            tail_slope = float(stats.linregress(index[tail], np.log(values[tail])).slope)

        if slope < settings.SLOPE_CONVERGENT and values[-1] < settings.TAIL_FRACTION * total:
            return Verdict.CONVERGENT_EVIDENCE, slope, tail_slope
        if tail_slope is not None and tail_slope >= 0:
            return Verdict.DIVERGENT_EVIDENCE, slope, tail_slope
        return Verdict.INCONCLUSIVE, slope, tail_slope

    def _integrand(self, kernel: Kernel, u: np.ndarray, w: float, singular_at_one: bool) -> float:
        top = int(math.floor(w))
        if singular_at_one and top == w:
            top -= 1
        if top < 1:
            return 0.0
        n = np.arange(1, top + 1)
        weights = np.asarray(kernel.q(n / w), dtype=float)
        return abs(math.fsum(n * u[1:top + 1] * weights)) / w ** 2

    def _singular_at_one(self, kernel: Kernel) -> bool:
        return bool(np.isinf(kernel.q(1.0)))

    def _Q_values(self, kernel: Kernel, t: np.ndarray) -> np.ndarray:
        closed = kernel.closed_form_Q(t)
        if closed is not None:
            return np.asarray(closed, dtype=float)
        return np.array([self.kernel_service.eval_Q(kernel, float(x)) for x in t])

    def _checkpoints(self, A: float, W_max: float) -> List[float]:
        edges = [A]
        j = math.floor(math.log2(A)) + 1
        while 2.0 ** j < W_max:
            edges.append(2.0 ** j)
            j += 1
        edges.append(W_max)
        return edges

    def _midpoints(self, a: float, b: float, count: int) -> np.ndarray:
        x = a + (np.arange(count) + 0.5) * (b - a) / count
        on_integer = np.abs(x - np.round(x)) < 1e-12
        return np.where(on_integer, x + INTEGER_OFFSET, x)

    def _check_positive(self, w: float) -> None:
        if not w > 0:
            raise ParameterOutOfRange(f"w must be > 0, got {w}")
