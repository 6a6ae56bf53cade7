"""
Exact kernel sums: S^{i,j}, G_i and its integral representation,
alternating kernel sums and Riesz typical means.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import comb

from nqlab.core.errors import (
    DerivativeUnavailable,
    IndexOutOfRange,
    OrderTooHigh,
    ParameterOutOfRange,
    TooCloseToJump,
)
from nqlab.core.quadrature import integrate_scalar
from nqlab.models.kernel import Kernel
from nqlab.schemas.estimates import RepresentationCheck
from nqlab.services.kernel_service import KernelService

logger = logging.getLogger(__name__)

# Quadrature tolerances for the integral representation of G_i.
_REPRESENTATION_EPSABS = 1e-12
_REPRESENTATION_EPSREL = 1e-11


def cos_derivative(j: int, angle):
    """j-th derivative of cos evaluated at angle, i.e. cos(angle + j pi / 2)."""
    phase = j % 4
    if phase == 0:
        return np.cos(angle)
    if phase == 1:
        return -np.sin(angle)
    if phase == 2:
        return -np.cos(angle)
    return np.sin(angle)


class EstimatesService:
    """
    Service for the exact sums behind the kernel estimates.
    """

    def __init__(self, kernel_service: Optional[KernelService] = None):
        self.kernel_service = kernel_service or KernelService()

    def S_sum(self, i: int, j: int, x: float, u: float) -> float:
        """
        Sum of (x - n)^i (cos nu)_j over 0 <= n <= floor(x), where
        (cos nu)_j = n^j cos(nu + j pi / 2). Powers 0^0 count as 1.
        """
        if i < 0 or j < 0:
            raise IndexOutOfRange(f"S^{{i,j}} needs i, j >= 0, got ({i}, {j})")
        if x < 0:
            return 0.0
        n = np.arange(int(math.floor(x)) + 1, dtype=float)
        terms = np.power(x - n, i) * np.power(n, j) * cos_derivative(j, n * u)
        return math.fsum(terms)

    def S_table(
        self, x: float, u_values: Sequence[float], i_values: Sequence[int], j_values: Sequence[int]
    ) -> np.ndarray:
        """
        S^{i,j}(x, u) for every (i, j, u) at one x.

        Returns:
            Array of shape (len(i_values), len(j_values), len(u_values))
        """
        u = np.asarray(u_values, dtype=float)
        n = np.arange(int(math.floor(x)) + 1, dtype=float)
        angle = np.outer(n, u)
        cos, sin = np.cos(angle), np.sin(angle)
        table = np.empty((len(i_values), len(j_values), len(u)))
        for b, j in enumerate(j_values):
            phase = j % 4
            trig = (cos, -sin, -cos, sin)[phase]
            weighted = np.power(n, j)[:, None] * trig
            for a, i in enumerate(i_values):
                table[a, b] = np.power(x - n, i) @ weighted
        return table

    def alt_sum(self, kernel: Kernel, p: int, w: float) -> float:
        """
        Sum of (-1)^n n^p q(n / w) over 0 <= n <= floor(w).

        At integer w the n = w term is dropped when q(1) is infinite.

        Raises:
            OrderTooHigh: if p > k
            ParameterOutOfRange: if w < 1 or p < 0
        """
        if p < 0:
            raise ParameterOutOfRange(f"p must be >= 0, got {p}")
        if p > kernel.k:
            raise OrderTooHigh(f"alternating sum of order p={p} needs p <= k={kernel.k}")
        if w < 1:
            raise ParameterOutOfRange(f"w must be >= 1, got {w}")

        top = self._top_index(kernel, w)
        n = np.arange(top + 1, dtype=float)
        signs = np.where(n % 2 == 0, 1.0, -1.0)
        weights = np.asarray(kernel.q(n / w), dtype=float)
        return math.fsum(signs * np.power(n, p) * weights)

    def derivative_index_bound(self, kernel: Kernel, r: int) -> int:
        """m = min(k - r, r), the largest admissible i for G_i."""
        if not 0 <= r <= kernel.k:
            raise IndexOutOfRange(f"r must lie in [0, k={kernel.k}], got {r}")
        return min(kernel.k - r, r)

    def G_direct(self, kernel: Kernel, i: int, w: float, u: float, *, r: int) -> float:
        """
        G_i(w, u): sum of q(n / w) n^{k+1-i} cos(nu + (k+1-i) pi / 2) over n <= w.

        Raises:
            IndexOutOfRange: unless 0 <= r <= k and 0 <= i <= min(k - r, r)
        """
        order = self._G_order(kernel, i, r)
        if w < 1:
            return 0.0
        top = self._top_index(kernel, w)
        n = np.arange(1, top + 1, dtype=float)
        weights = np.asarray(kernel.q(n / w), dtype=float)
        return math.fsum(weights * np.power(n, order) * cos_derivative(order, n * u))

    def g_integrand(self, kernel: Kernel, i: int, x: float, w: float, u: float, *, r: int) -> float:
        """
        g_i(x, w, u) = w^{-k} q^k(x / w) S^{k-1,k+1-i}(x, u) / (k - 1)!,
        the x-integrand of the representation of G_i.
        """
        order = self._G_order(kernel, i, r)
        self._check_representable(kernel)
        k = kernel.k
        scale = w ** (-k) / math.factorial(k - 1)
        return scale * float(kernel.qk(x / w)) * self.S_sum(k - 1, order, x, u)

    def G_via_representation(
        self, kernel: Kernel, i: int, w: float, u: float, *, r: int
    ) -> float:
        """
        G_i(w, u) as the integral of g_i(x, w, u) over [1, w].

        Panels are split at the integers, where S^{k-1,j}(., u) gains terms.
        On the last panel a Cesàro kernel's endpoint singularity is handled by
        an algebraic quadrature weight.

        Raises:
            IndexOutOfRange: as G_direct
            ParameterOutOfRange: if k < 1
            DerivativeUnavailable: if the kernel has no order-k derivative
            QuadratureFailure: if a panel integral does not converge
        """
        order = self._G_order(kernel, i, r)
        self._check_representable(kernel)
        if w <= 1:
            return 0.0

        k = kernel.k
        scale = w ** (-k) / math.factorial(k - 1)
        edges = list(range(1, int(math.ceil(w)))) + [w]
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            # S^{k-1,j}(x, u) on (a, b) keeps the terms n <= a
            n = np.arange(1, a + 1, dtype=float)
            coefficients = np.power(n, order) * cos_derivative(order, n * u)

            def partial_sum(x, n=n, coefficients=coefficients):
                return float(np.power(x - n, k - 1) @ coefficients)

            if b == w:
                pieces.append(self._last_panel(kernel, partial_sum, a, w))
            else:
                pieces.append(
                    integrate_scalar(
                        lambda x, f=partial_sum: float(kernel.qk(x / w)) * f(x),
                        a,
                        b,
                        epsabs=_REPRESENTATION_EPSABS,
                        epsrel=_REPRESENTATION_EPSREL,
                    )
                )
        return scale * math.fsum(pieces)

    def representation_lattice(
        self,
        kernel: Kernel,
        r: int,
        w_values: Sequence[float],
        u_values: Sequence[float],
        i_values: Optional[Sequence[int]] = None,
    ) -> List[RepresentationCheck]:
        """
        Compare G_direct with G_via_representation on a (w, u) lattice.
        """
        m = self.derivative_index_bound(kernel, r)
        i_values = list(range(m + 1)) if i_values is None else list(i_values)
        checks = []
        for i in i_values:
            for w in w_values:
                for u in u_values:
                    direct = self.G_direct(kernel, i, w, u, r=r)
                    represented = self.G_via_representation(kernel, i, w, u, r=r)
                    error = abs(represented - direct) / max(abs(direct), 1e-300)
                    checks.append(
                        RepresentationCheck(
                            i=i, w=w, u=u, direct=direct, representation=represented,
                            relative_error=error,
                        )
                    )
        worst = max((c.relative_error for c in checks), default=0.0)
        logger.info(f"Representation lattice of {len(checks)} points, max relative error {worst:.3e}")
        return checks

    def riesz_mean(self, lam: Sequence[float], a: Sequence[float], rho: float, x: float) -> float:
        """
        Sum of (x - lambda_n)^rho a_n over lambda_n <= x.

        Raises:
            ParameterOutOfRange: if lambda is not strictly increasing, the
                lengths differ or rho < 0
        """
        lam, a = self._check_riesz(lam, a)
        if rho < 0:
            raise ParameterOutOfRange(f"rho must be >= 0, got {rho}")
        inside = lam <= x
        if not inside.any():
            return 0.0
        return math.fsum(np.power(x - lam[inside], rho) * a[inside])

    def check_riesz_identity(
        self, lam: Sequence[float], a: Sequence[float], k: int, x: float, step: float
    ) -> float:
        """
        |A(x) - (d/dx)^k A^k(x) / k!| with the derivative taken as a central
        k-fold difference.

        Raises:
            TooCloseToJump: if x is within 10 * step * k of some lambda_n
        """
        lam_arr, a_arr = self._check_riesz(lam, a)
        if k < 1:
            raise ParameterOutOfRange(f"k must be a positive integer, got {k}")
        if step <= 0:
            raise ParameterOutOfRange(f"step must be > 0, got {step}")
        gap = float(np.min(np.abs(lam_arr - x)))
        if gap < 10 * step * k:
            raise TooCloseToJump(
                f"x={x} lies {gap:.3g} from a jump, need at least {10 * step * k:.3g}"
            )

        difference = math.fsum(
            (-1) ** l * comb(k, l, exact=True) * self.riesz_mean(lam_arr, a_arr, k, x + (k / 2 - l) * step)
            for l in range(k + 1)
        )
        derivative = difference / step ** k / math.factorial(k)
        deviation = abs(derivative - self.riesz_mean(lam_arr, a_arr, 0, x))
        logger.debug(f"Riesz identity k={k} at x={x}: deviation {deviation:.3e}")
        return deviation

    def _last_panel(self, kernel: Kernel, partial_sum, a: float, w: float) -> float:
        k = kernel.k
        form = kernel.power_form(k)
        if form is not None and not float(form[1]).is_integer():
            coef, exponent = form
            # q^k(x / w) = (-1)^k coef w^{-exponent} (w - x)^exponent
            factor = (-1) ** k * coef * w ** (-exponent)
            return factor * integrate_scalar(
                partial_sum,
                a,
                w,
                epsabs=_REPRESENTATION_EPSABS,
                epsrel=_REPRESENTATION_EPSREL,
                weight="alg",
                wvar=(0.0, exponent),
            )
        return integrate_scalar(
            lambda x: float(kernel.qk(x / w)) * partial_sum(x),
            a,
            w,
            epsabs=_REPRESENTATION_EPSABS,
            epsrel=_REPRESENTATION_EPSREL,
        )

    def _G_order(self, kernel: Kernel, i: int, r: int) -> int:
        m = self.derivative_index_bound(kernel, r)
        if not 0 <= i <= m:
            raise IndexOutOfRange(f"i must lie in [0, m={m}] for r={r}, got {i}")
        return kernel.k + 1 - i

    def _check_representable(self, kernel: Kernel) -> None:
        if kernel.k < 1:
            raise ParameterOutOfRange("integral representation of G_i requires k >= 1")
        if not kernel.has_derivative(kernel.k):
            raise DerivativeUnavailable(f"Kernel has no derivative of order {kernel.k}")

    def _top_index(self, kernel: Kernel, w: float) -> int:
        top = int(math.floor(w))
        if top == w and np.isinf(kernel.q(1.0)):
            top -= 1
        return top

    def _check_riesz(self, lam, a):
        lam = np.asarray(lam, dtype=float)
        a = np.asarray(a, dtype=float)
        if lam.shape != a.shape or lam.ndim != 1:
            raise ParameterOutOfRange("lambda and a must be sequences of equal length")
        if lam.size and (lam[0] <= 0 or np.any(np.diff(lam) <= 0)):
            raise ParameterOutOfRange("lambda must be positive and strictly increasing")
        return lam, a
