"""
Service layer for Fourier models, conjugate and derived conjugate series,
the correction polynomial P and the symmetrised difference h.
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import fft

from nqlab.core.config import settings
from nqlab.core.errors import IndexOutOfRange, ParameterOutOfRange, SingularAtZero
from nqlab.core.quadrature import integrate_scalar
from nqlab.models.fourier_model import FourierModel
from nqlab.models.periodic import PeriodicFunction, make_function
from nqlab.models.series import SeriesKind, SeriesSource
from nqlab.schemas.fourier import DerivedSeriesSpec, FunctionSpec, SplitTerm

logger = logging.getLogger(__name__)

DEFAULT_SERIES_ORDER = 256

# sin(nu + r pi / 2) as (sign, QUADPACK weight) by r mod 4
_SHIFTED_SINE = {0: (1.0, "sin"), 1: (1.0, "cos"), 2: (-1.0, "sin"), 3: (-1.0, "cos")}


class FourierService:
    """
    Service for Fourier coefficients and derived conjugate series.
    """

    def function_from_spec(self, spec: FunctionSpec) -> PeriodicFunction:
        return make_function(spec.name, **spec.params)

    def fourier_coefficients(
        self, f: PeriodicFunction, N: int, quad_nodes: Optional[int] = None
    ) -> FourierModel:
        """
        Coefficients a_0..a_N and b_1..b_N by the uniform trapezoid rule.

        Nodes are t_j = -π + 2πj / M, so a_n - i b_n = (2 / M)(-1)^n F_n with
        F the real FFT of the samples.

        Raises:
            ParameterOutOfRange: unless N >= 1 and quad_nodes >= 4N
        """
        M = settings.DEFAULT_QUAD_NODES if quad_nodes is None else int(quad_nodes)
        if N < 1:
            raise ParameterOutOfRange("N must be >= 1")
        if M < 4 * N:
            raise ParameterOutOfRange(f"quad_nodes must be >= 4N = {4 * N}")

        t = -math.pi + 2.0 * math.pi * np.arange(M) / M
        spectrum = fft.rfft(f.eval(t))[: N + 1]
        signs = (-1.0) ** np.arange(N + 1)
        scaled = 2.0 / M * signs * spectrum
        a = scaled.real.copy()
        b = -scaled.imag.copy()
        b[0] = 0.0
        logger.debug(f"Computed {N} Fourier coefficients of {f.name} with {M} nodes")
        return FourierModel(a=a, b=b)

    def conjugate_term(self, m: FourierModel, n: int, x: float) -> float:
        """B_n(x) = b_n cos nx - a_n sin nx."""
        self._check_index(m, n)
        return float(m.b[n] * math.cos(n * x) - m.a[n] * math.sin(n * x))

    def derived_conjugate_term(self, m: FourierModel, n: int, x: float, r: int) -> float:
        """
        r-th x-derivative of B_n, n^r (b_n cos(nx + rπ/2) - a_n sin(nx + rπ/2)).
        """
        self._check_index(m, n)
        if r < 0:
            raise ParameterOutOfRange("r must be >= 0")
        phase = n * x + r * math.pi / 2
        return float(n ** r * (m.b[n] * math.cos(phase) - m.a[n] * math.sin(phase)))

    def derived_conjugate_terms(self, m: FourierModel, n: np.ndarray, x: float, r: int) -> np.ndarray:
        """Vectorised derived_conjugate_term; indices past N give 0."""
        n = np.asarray(n, dtype=int)
        inside = (n >= 1) & (n <= m.N)
        k = np.where(inside, n, 0)
        phase = k * x + r * math.pi / 2
        values = k.astype(float) ** r * (m.b[k] * np.cos(phase) - m.a[k] * np.sin(phase))
        return np.where(inside, values, 0.0)

    def default_theta(self, f: PeriodicFunction, x: float, r: int) -> List[float]:
        """θ_i = f^(i)(x), so the numerator of h vanishes to order r at u = 0."""
        return [f.derivative(i, x) for i in range(r)]

    def resolve_spec(self, f: PeriodicFunction, spec: DerivedSeriesSpec) -> DerivedSeriesSpec:
        if spec.theta is not None:
            return spec
        theta = self.default_theta(f, spec.x, spec.r)
        logger.debug(f"Default theta for {f.name} at x={spec.x}: {theta}")
        return spec.model_copy(update={"theta": theta})

    def p_polynomial(self, spec: DerivedSeriesSpec, u: float) -> float:
        """
        P(u), the sum of θ_i u^i / i! for i < r.

        Raises:
            ParameterOutOfRange: if u lies outside [-π, π]
        """
        if abs(u) > math.pi * (1 + 1e-12):
            raise ParameterOutOfRange(f"u must lie in [-π, π], got {u}")
        return self._p_value(spec.theta or [0.0] * spec.r, u)

    def h_function(self, f: PeriodicFunction, spec: DerivedSeriesSpec, u: float) -> float:
        """
        h(u) = [{f(x+u) - P(u)} - (-1)^r {f(x-u) - P(-u)}] / (2 u^r).

        Raises:
            SingularAtZero: if |u| < U_MIN
            ParameterOutOfRange: if u > π
        """
        if abs(u) < settings.U_MIN:
            raise SingularAtZero(f"h is not evaluated below u = {settings.U_MIN}")
        if u < 0 or u > math.pi * (1 + 1e-12):
            raise ParameterOutOfRange(f"u must lie in (0, π], got {u}")
        spec = self.resolve_spec(f, spec)
        return self._numerator(f, spec)(u) / (2.0 * u ** spec.r)

    def h_callable(self, f: PeriodicFunction, spec: DerivedSeriesSpec) -> Callable[[float], float]:
        """
        h as a scalar callable for integration; below U_MIN it takes the
        value at U_MIN.
        """
        spec = self.resolve_spec(f, spec)
        numerator = self._numerator(f, spec)
        floor = settings.U_MIN
        r = spec.r

        def h(u: float) -> float:
            u = max(u, floor)
            return numerator(u) / (2.0 * u ** r)

        return h

    def alpha_beta_split(
        self,
        f: PeriodicFunction,
        spec: DerivedSeriesSpec,
        n: int,
        beta_method: str = "closed_form",
    ) -> Tuple[float, float]:
        """
        Split (d/dx)^r B_n(x) into the h part alpha_n and the P part beta_n.

        alpha_n = (-1)^r (2/π) times the integral over (0, π) of
        h(u) u^r (d/du)^r sin nu, integrated as an oscillatory-weight
        quadrature on panels split where x ± u meets a breakpoint of f.

        Args:
            f: Periodic function
            spec: Evaluation point, order and θ (defaults resolved from f)
            n: Term index, n >= 1
            beta_method: "closed_form" or "quadrature"

        Returns:
            (alpha_n, beta_n)
        """
        if n < 1:
            raise ParameterOutOfRange("n must be >= 1")
        spec = self.resolve_spec(f, spec)
        r = spec.r
        sign, weight = _SHIFTED_SINE[r % 4]
        scale = (-1) ** r * sign * n ** r / math.pi

        numerator = self._numerator(f, spec)
        edges = self._panels(f, spec.x)
        integral = math.fsum(
            integrate_scalar(numerator, lo, hi, weight=weight, wvar=n)
            for lo, hi in zip(edges[:-1], edges[1:])
        )
        alpha_n = scale * integral

        if beta_method == "closed_form":
            beta_n = self.beta_closed_form(spec.theta, r, n)
        elif beta_method == "quadrature":
            theta = spec.theta

            def correction(u):
                return self._p_value(theta, u) - (-1) ** r * self._p_value(theta, -u)

            beta_n = scale * integrate_scalar(correction, 0.0, math.pi, weight=weight, wvar=n)
        else:
            raise ParameterOutOfRange(f"unknown beta_method '{beta_method}'")
        return alpha_n, beta_n

    def beta_closed_form(self, theta: List[float], r: int, n: int) -> float:
        """
        Closed form of the P part.

        Odd r = 2p + 1 uses θ_2j, even r = 2p uses θ_(2j-1); both sum
        (-1)^(p+μ) n^(2p-2μ+1) θ π^(2j-2μ) / (2j-2μ+1)! over 1 <= μ <= j <= p.
        """
        p = r // 2
        total = 0.0
        for mu in range(1, p + 1):
            inner = 0.0
            for j in range(mu, p + 1):
                index = 2 * j if r % 2 else 2 * j - 1
                inner += theta[index] * math.pi ** (2 * j - 2 * mu) / math.factorial(2 * j - 2 * mu + 1)
            total += (-1) ** (p + mu) * n ** (2 * p - 2 * mu + 1) * inner
        return 2.0 * (-1) ** n * total

    def split_table(
        self,
        f: PeriodicFunction,
        spec: DerivedSeriesSpec,
        n_max: int,
        model: Optional[FourierModel] = None,
        beta_method: str = "closed_form",
    ) -> List[SplitTerm]:
        """alpha_n, beta_n and, given a model, their deviation from the derived term."""
        spec = self.resolve_spec(f, spec)
        rows = []
        for n in range(1, n_max + 1):
            alpha_n, beta_n = self.alpha_beta_split(f, spec, n, beta_method=beta_method)
            row = SplitTerm(n=n, alpha_n=alpha_n, beta_n=beta_n)
            if model is not None:
                derived = self.derived_conjugate_term(model, n, spec.x, spec.r)
                row.derived_term = derived
                row.deviation = abs(alpha_n + beta_n - derived)
            rows.append(row)
        return rows

    def derived_conjugate_series_source(
        self,
        f: PeriodicFunction,
        spec: DerivedSeriesSpec,
        N: int = DEFAULT_SERIES_ORDER,
        quad_nodes: Optional[int] = None,
    ) -> SeriesSource:
        """
        Series of r-th derived conjugate terms at x; term 0 and terms past N are 0.
        """
        nodes = quad_nodes or max(settings.DEFAULT_QUAD_NODES, 4 * N)
        model = self.fourier_coefficients(f, N, nodes)
        x, r = spec.x, spec.r

        def term(n):
            return self.derived_conjugate_terms(model, n, x, r)

        return SeriesSource(
            SeriesKind.DERIVED_CONJUGATE, term, max_n_hint=N, name=f"derived({f.name}, r={r})"
        )

    def _numerator(self, f: PeriodicFunction, spec: DerivedSeriesSpec) -> Callable[[float], float]:
        x, r, theta = spec.x, spec.r, list(spec.theta)
        parity = (-1) ** r

        def numerator(u: float) -> float:
            plus = f.eval(x + u) - self._p_value(theta, u)
            minus = f.eval(x - u) - self._p_value(theta, -u)
            return float(plus - parity * minus)

        return numerator

    def _p_value(self, theta: List[float], u: float) -> float:
        return math.fsum(c * u ** i / math.factorial(i) for i, c in enumerate(theta))

    def _panels(self, f: PeriodicFunction, x: float) -> List[float]:
        cuts = set()
        for b in f.breakpoints:
            for u in ((b - x) % (2 * math.pi), (x - b) % (2 * math.pi)):
                if 1e-12 < u < math.pi - 1e-12:
                    cuts.add(u)
        return [0.0] + sorted(cuts) + [math.pi]

    def _check_index(self, m: FourierModel, n: int) -> None:
        if not 1 <= n <= m.N:
            raise IndexOutOfRange(f"n must lie in [1, {m.N}], got {n}")
