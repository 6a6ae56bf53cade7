"""
Kernel construction, tail integrals Q and Q_k, and the admissibility checks.
"""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import stats

from nqlab.core.config import settings
from nqlab.core.errors import DerivativeUnavailable, NqLabError, ParameterOutOfRange
from nqlab.core.plugins import load_callable
from nqlab.core.quadrature import integrate_scalar
from nqlab.models.kernel import KERNEL_LIBRARY, CesaroKernel, Kernel, UserDefinedKernel
from nqlab.schemas.kernel import (
    AdmissibilityReport,
    ConditionResult,
    KernelFamily,
    KernelSpec,
    TailIntegralReport,
)

logger = logging.getLogger(__name__)


def default_t_grid() -> List[float]:
    return np.linspace(0.005, 0.995, 199).tolist()


class KernelService:
    """
    Service for kernel-related operations.
    """

    def make_cesaro_kernel(self, alpha: float, delta: float) -> CesaroKernel:
        """
        Build q(t) = (alpha + delta)(1 - t)^(alpha + delta - 1).

        Raises:
            ParameterOutOfRange: unless alpha >= 0, delta > 0 and
                alpha + delta <= floor(alpha) + 1
        """
        kernel = CesaroKernel(alpha=alpha, delta=delta)
        logger.debug(f"Built Cesàro kernel alpha={alpha} delta={delta}")
        return kernel

    def make_user_kernel(
        self,
        alpha: float,
        func: Callable,
        derivatives: Sequence[Callable] = (),
        allow_finite_differences: bool = False,
        name: str = "user",
    ) -> UserDefinedKernel:
        return UserDefinedKernel(
            alpha=alpha,
            func=func,
            derivatives=tuple(derivatives),
            allow_finite_differences=allow_finite_differences,
            name=name,
        )

    def from_spec(self, spec: KernelSpec) -> Kernel:
        """
        Build a kernel from its configuration record.

        User-defined kernels are looked up in the named library first and
        otherwise imported as "package.module:callable" references.
        """
        if spec.family == KernelFamily.CESARO:
            return self.make_cesaro_kernel(spec.alpha, spec.delta)

        if spec.function in KERNEL_LIBRARY:
            func, derivatives = KERNEL_LIBRARY[spec.function]
        else:
            func = load_callable(spec.function)
            derivatives = tuple(load_callable(ref) for ref in spec.derivatives)
        return self.make_user_kernel(
            spec.alpha,
            func,
            derivatives,
            allow_finite_differences=spec.allow_finite_differences,
            name=spec.function,
        )

    def eval_Q(self, kernel: Kernel, t: float, method: str = "auto") -> float:
        """
        Q(t), the integral of q over [1 - t, 1].

        Args:
            kernel: Kernel to integrate
            t: Point in [0, 1]
            method: "auto" uses a closed form when the kernel has one,
                "quadrature" always integrates

        Returns:
            Q(t)
        """
        self._check_unit_interval(t)
        if t == 0:
            return 0.0
        if method == "auto":
            closed = kernel.closed_form_Q(t)
            if closed is not None:
                return closed
        return self._tail_integral(kernel, 0, t)

    def eval_Qk(self, kernel: Kernel, t: float, method: str = "auto") -> float:
        """
        Q_k(t), the integral of (-1)^k q^(k) over [1 - t, 1].

        Raises:
            DerivativeUnavailable: if the kernel has no order-k derivative
        """
        self._check_unit_interval(t)
        if not kernel.has_derivative(kernel.k):
            raise DerivativeUnavailable(
                f"Kernel has no derivative of order {kernel.k} for Q_k"
            )
        if t == 0:
            return 0.0
        if method == "auto":
            closed = kernel.closed_form_Qk(t)
            if closed is not None:
                return closed
        return (-1) ** kernel.k * self._tail_integral(kernel, kernel.k, t)

    def check_admissibility(
        self,
        kernel: Kernel,
        t_grid: Optional[Sequence[float]] = None,
        tol: float = 1e-8,
    ) -> AdmissibilityReport:
        """
        Run the seven admissibility conditions on a grid.

        Failures are recorded in the report, never raised. Conditions (3) and
        (5) are finite-difference consistency probes only.

        Args:
            kernel: Kernel under test
            t_grid: Points in (0, 1); a uniform 199-point grid by default
            tol: Tolerance for the sign, mass and vanishing checks

        Returns:
            AdmissibilityReport with exactly seven entries
        """
        grid = np.sort(np.asarray(t_grid if t_grid is not None else default_t_grid(), dtype=float))
        if grid.size == 0 or grid[0] <= 0 or grid[-1] >= 1:
            raise ParameterOutOfRange("t_grid must be a nonempty subset of (0, 1)")
        if tol <= 0:
            raise ParameterOutOfRange("tol must be > 0")

        logger.info(f"Checking admissibility of {kernel.describe()}")
        sup_coarse = sup_refined = None
        conditions = [
            self._condition_nonnegative(kernel, grid, tol),
            self._condition_unit_mass(kernel, tol),
            self._condition_smooth_orders(kernel, grid),
            self._condition_vanishing_at_one(kernel, tol),
            self._condition_kth_derivative(kernel, grid),
            self._condition_monotone_qk(kernel, grid, tol),
        ]
        try:
            seventh, sup_coarse, sup_refined = self._condition_ratio_bound(kernel)
        except NqLabError as e:
            logger.warning(f"Condition (7) could not be evaluated: {e}")
            seventh = ConditionResult(condition=7, name="ratio bound", passed=False, detail=str(e))
        conditions.append(seventh)

        derivative_sups, kth_l1 = self._derivative_bounds(kernel, grid)
        report = AdmissibilityReport(
            kernel=kernel.describe(),
            conditions=conditions,
            t_grid=grid.tolist(),
            tol=tol,
            condition7_coarse_sup=sup_coarse,
            condition7_refined_sup=sup_refined,
            derivative_sups=derivative_sups,
            kth_derivative_l1=kth_l1,
        )
        failed = [c.condition for c in conditions if not c.passed]
        if failed:
            logger.info(f"Admissibility failed for conditions {failed}")
        else:
            logger.info("All seven admissibility conditions passed")
        return report

    def check_tail_integrability(self, kernel: Kernel, levels: int = 20) -> TailIntegralReport:
        """
        Partial integrals of q^k(t) / (1 - t)^(alpha - k) over [0, 1 - 2^-j].

        Passes when the dyadic increments shrink geometrically.
        """
        if levels < 3:
            raise ParameterOutOfRange("levels must be >= 3")
        gap = kernel.alpha - kernel.k

        def integrand(t):
            return kernel.qk(t) / (1.0 - t) ** gap

        partials, increments = [], []
        total, lower = 0.0, 0.0
        for j in range(1, levels + 1):
            upper = 1.0 - 2.0 ** (-j)
            piece = integrate_scalar(integrand, lower, upper)
            total += piece
            partials.append(total)
            increments.append(piece)
            lower = upper

        ratios = [
            abs(b) / abs(a) if a != 0 else 0.0 for a, b in zip(increments[:-1], increments[1:])
        ]
        passed = bool(np.all(np.isfinite(partials)) and max(ratios[-3:]) <= 0.99)
        logger.info(f"Tail integrability: last ratio {ratios[-1]:.4f}, passed={passed}")
        return TailIntegralReport(
            levels=list(range(1, levels + 1)),
            partials=partials,
            increments=increments,
            ratios=ratios,
            passed=passed,
        )

    def _check_unit_interval(self, t: float) -> None:
        if not 0 <= t <= 1:
            raise ParameterOutOfRange(f"t must lie in [0, 1], got {t}")

    def _tail_integral(self, kernel: Kernel, order: int, t: float) -> float:
        """Integral of q^(order) over [1 - t, 1]."""
        form = kernel.power_form(order)
        if form is not None and not float(form[1]).is_integer():
            coef, exponent = form
            return integrate_scalar(
                lambda u: coef, 1.0 - t, 1.0, weight="alg", wvar=(0.0, exponent)
            )
        return integrate_scalar(lambda u: kernel.q_deriv(order, u), 1.0 - t, 1.0)

    def _condition_nonnegative(self, kernel, grid, tol) -> ConditionResult:
        points = np.concatenate(([0.0], grid, [1.0]))
        values = np.asarray(kernel.q(points), dtype=float)
        values = np.where(np.isnan(values), -np.inf, values)
        index = int(np.argmin(values))
        passed = bool(values[index] >= -tol)
        return ConditionResult(
            condition=1,
            name="nonnegative",
            passed=passed,
            witness=None if passed else float(points[index]),
            value=float(values[index]),
        )

    def _condition_unit_mass(self, kernel, tol) -> ConditionResult:
        mass = self._tail_integral(kernel, 0, 1.0)
        error = abs(mass - 1.0)
        return ConditionResult(
            condition=2, name="unit mass", passed=bool(error <= tol), value=error
        )

    def _condition_smooth_orders(self, kernel, grid) -> ConditionResult:
        if kernel.k <= 1:
            return ConditionResult(condition=3, name="derivatives below k", passed=True,
                                   detail="no orders to probe")
        return self._consistency(kernel, grid, range(1, kernel.k), 3, "derivatives below k")

    def _condition_kth_derivative(self, kernel, grid) -> ConditionResult:
        if kernel.k == 0:
            values = np.asarray(kernel.q(grid), dtype=float)
            finite = np.isfinite(values)
            witness = None if finite.all() else float(grid[np.argmin(finite)])
            return ConditionResult(condition=5, name="k-th derivative", passed=bool(finite.all()),
                                   witness=witness, detail="k = 0: q finite on grid")
        return self._consistency(kernel, grid, [kernel.k], 5, "k-th derivative")

    def _consistency(self, kernel, grid, orders, number, name) -> ConditionResult:
        """Compare each analytic derivative with a difference quotient of the order below."""
        worst, witness = 0.0, None
        for order in orders:
            if not kernel.has_derivative(order):
                return ConditionResult(condition=number, name=name, passed=False,
                                       detail=f"order {order} unavailable")
            for t in grid:
                h = max(settings.FD_STEP_MIN, t * settings.FD_STEP_REL)
                lo, hi = max(t - h, 0.0), min(t + h, 1.0)
                below_hi = kernel.q_deriv(order - 1, hi)
                below_lo = kernel.q_deriv(order - 1, lo)
                estimate = (below_hi - below_lo) / (hi - lo)
                exact = kernel.q_deriv(order, t)
                residual = abs(estimate - exact) / max(1.0, abs(exact))
                if not np.isfinite(residual):
                    residual = np.inf
                if residual > worst:
                    worst, witness = residual, float(t)
        passed = bool(worst <= settings.FD_CONSISTENCY_TOL)
        return ConditionResult(
            condition=number,
            name=name,
            passed=passed,
            witness=None if passed else witness,
            value=float(worst),
            detail="finite-difference consistency",
        )

    def _condition_vanishing_at_one(self, kernel, tol) -> ConditionResult:
        worst, witness, detail = 0.0, None, ""
        for order in range(kernel.k):
            if not kernel.has_derivative(order):
                return ConditionResult(condition=4, name="vanishing at 1", passed=False,
                                       witness=1.0, detail=f"order {order} unavailable")
            value = abs(kernel.q_deriv(order, 1.0))
            if np.isfinite(value):
                if value > tol:
                    return ConditionResult(condition=4, name="vanishing at 1", passed=False,
                                           witness=1.0, value=float(value),
                                           detail=f"order {order}")
                worst = max(worst, float(value))
                continue
            # not evaluable at 1: extrapolate the approach from the left
            eps = 2.0 ** -np.arange(4, 21)
            approach = np.abs(np.asarray(kernel.q_deriv(order, 1.0 - eps), dtype=float))
            if np.all(approach <= tol):
                continue
            fit = stats.linregress(np.log(eps), np.log(np.maximum(approach, 1e-300)))
            if not fit.slope > 0:
                return ConditionResult(condition=4, name="vanishing at 1", passed=False,
                                       witness=1.0, value=float(approach[-1]),
                                       detail=f"order {order} does not decay, slope {fit.slope:.3f}")
            detail = "extrapolated"
        return ConditionResult(condition=4, name="vanishing at 1", passed=True,
                               value=worst, detail=detail)

    def _condition_monotone_qk(self, kernel, grid, tol) -> ConditionResult:
        if not kernel.has_derivative(kernel.k):
            return ConditionResult(condition=6, name="q^k nonnegative nondecreasing", passed=False,
                                   detail=f"order {kernel.k} unavailable")
        values = np.asarray(kernel.qk(grid), dtype=float)
        negative = np.flatnonzero(values < -tol)
        if negative.size:
            return ConditionResult(condition=6, name="q^k nonnegative nondecreasing", passed=False,
                                   witness=float(grid[negative[0]]), value=float(values[negative[0]]))
        drops = np.diff(values) < -tol * np.maximum(1.0, np.abs(values[:-1]))
        if drops.any():
            index = int(np.argmax(drops)) + 1
            return ConditionResult(condition=6, name="q^k nonnegative nondecreasing", passed=False,
                                   witness=float(grid[index]), value=float(values[index]))
        return ConditionResult(condition=6, name="q^k nonnegative nondecreasing", passed=True,
                               value=float(values.min()))

    def _condition_ratio_bound(self, kernel):
        """
        sup over t of the integral of Q_k(u) / u^(1 + alpha - k) on [0, t]
        divided by Q_k(t) / t^(alpha - k), on a coarse and a refined grid.
        """
        gap = kernel.alpha - kernel.k

        def integrand(u):
            return self.eval_Qk(kernel, u) / u ** (1.0 + gap)

        def sup_ratio(points):
            numerator, lower, best, witness = 0.0, 0.0, 0.0, None
            for t in points:
                numerator += integrate_scalar(integrand, lower, t)
                lower = t
                ratio = numerator / (self.eval_Qk(kernel, t) / t ** gap)
                if not np.isfinite(ratio) or ratio > best:
                    best, witness = ratio, float(t)
                if not np.isfinite(ratio):
                    break
            return best, witness

        t_min, t_max = settings.CONDITION7_T_MIN, settings.CONDITION7_T_MAX
        coarse, _ = sup_ratio(np.geomspace(t_min, t_max, 16))
        refined, witness = sup_ratio(np.geomspace(t_min, t_max, 31))
        passed = bool(
            np.isfinite(coarse) and np.isfinite(refined)
            and refined <= settings.CONDITION7_GROWTH * coarse
        )
        result = ConditionResult(
            condition=7,
            name="ratio bound",
            passed=passed,
            witness=None if passed else witness,
            value=float(refined),
            detail=f"coarse sup {coarse:.6g}",
        )
        return result, float(coarse), float(refined)

    def _derivative_bounds(self, kernel, grid):
        sups = []
        for order in range(kernel.k):
            if not kernel.has_derivative(order):
                break
            sups.append(float(np.max(np.abs(kernel.q_deriv(order, grid)))))
        kth_l1 = None
        if kernel.k >= 1 and kernel.has_derivative(kernel.k):
            form = kernel.power_form(kernel.k)
            try:
                if form is not None:
                    kth_l1 = integrate_scalar(lambda u: abs(form[0]), 0.0, 1.0,
                                              weight="alg", wvar=(0.0, form[1]))
                else:
                    kth_l1 = integrate_scalar(lambda u: abs(kernel.q_deriv(kernel.k, u)), 0.0, 1.0)
            except NqLabError as e:
                logger.warning(f"Could not integrate |q^(k)|: {e}")
        return sups, kth_l1
