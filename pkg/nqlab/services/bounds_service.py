"""
Empirical checks of the asymptotic kernel-sum estimates.

Each check evaluates the left-hand side of an O(.) statement on a grid,
divides by the stated bound and fits log-log exponents. A check passes when
the fitted exponents agree with the predicted ones within
EXPONENT_TOLERANCE and the sup-constant stays stable as the grid extends.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from nqlab.core.concurrency import parallel_map
from nqlab.core.config import settings
from nqlab.core.errors import BudgetExceeded, OrderTooHigh, ParameterOutOfRange
from nqlab.core.quadrature import integrate_scalar
from nqlab.models.kernel import Kernel
from nqlab.schemas.estimates import BoundFitReport, BoundRow, DecayGrids, SumGrid
from nqlab.services.estimates_service import EstimatesService

logger = logging.getLogger(__name__)

DECAY_ESTIMATES = ("near_decay", "far_decay", "short_range_average", "long_range", "tail_average")

# Envelope windows of the S^{i,j} check, relative to the x range.
_MIN_X_SPAN = 16.0
_MAX_U_FOR_X_SPAN = 0.25

_DECAY_EPSREL = 1e-7
_DECAY_EPSABS = 1e-12


def default_sum_grid() -> SumGrid:
    x_values = 2.0 ** (np.arange(3 * 8, 13 * 8 + 1) / 8)
    u_values = np.geomspace(2.0 ** -16, math.pi, 284)
    return SumGrid(x_values=x_values.tolist(), u_values=u_values.tolist())


def jitter(values: Sequence[float], rng: np.random.Generator, fraction: float = 0.01) -> List[float]:
    """Perturb every node by at most fraction of its value, keeping the order."""
    values = np.asarray(values, dtype=float)
    moved = values * (1.0 + fraction * rng.uniform(-1.0, 1.0, size=values.shape))
    return np.sort(moved).tolist()


def _fit(log_x: np.ndarray, log_y: np.ndarray) -> Tuple[float, float, float]:
    result = stats.linregress(log_x, log_y)
    return float(result.slope), float(result.intercept), float(result.rvalue ** 2)


def _pooled_r_squared(groups: Iterable[Tuple[np.ndarray, np.ndarray, float, float]]) -> float:
    """R^2 of several straight-line fits measured against the pooled mean."""
    groups = list(groups)
    if not groups:
        return float("nan")
    ys = np.concatenate([y for _, y, _, _ in groups])
    residual = sum(float(np.sum((y - (b + a * x)) ** 2)) for x, y, a, b in groups)
    total = float(np.sum((ys - ys.mean()) ** 2))
    if total == 0:
        return 1.0
    return 1.0 - residual / total


def _octave_maxima(w: np.ndarray, values: np.ndarray, per_octave: int) -> Tuple[np.ndarray, np.ndarray]:
    blocks = len(w) // per_octave
    centers, maxima = [], []
    for b in range(blocks):
        chunk = slice(b * per_octave, (b + 1) * per_octave)
        centers.append(math.exp(float(np.mean(np.log(w[chunk])))))
        maxima.append(float(np.max(values[chunk])))
    return np.asarray(centers), np.asarray(maxima)


class BoundsService:
    """
    Service for the empirical bound checks.
    """

    def __init__(self, estimates_service: Optional[EstimatesService] = None):
        self.estimates_service = estimates_service or EstimatesService()
        self.kernel_service = self.estimates_service.kernel_service

    def check_sum_bounds(self, grid: Optional[SumGrid] = None) -> BoundFitReport:
        """
        Bounds of S^{i,j}(x, u) in both regimes.

        For u > 1/x the bound is x^a u^{-b-1} with (a, b) = (i, j) when
        j <= i and (j, i) otherwise; for u <= 1/x it is x^{i+j+1}. Exponents
        are fitted on envelopes: the x-exponent from the sup over u of
        |S| u^{b+1} (resp. |S|), the u-exponent from the sup over x of
        |S| / x^a (resp. |S| / x^{i+j+1}). R^2 is pooled per regime and axis.
        """
        grid = grid or default_sum_grid()
        X = np.asarray(grid.x_values)
        U = np.asarray(grid.u_values)
        logger.info(
            f"S^{{i,j}} bound check on {len(X)} x values, {len(U)} u values, "
            f"i in {grid.i_values}, j in {grid.j_values}"
        )
        tables = parallel_map(
            lambda x: self.estimates_service.S_table(x, U, grid.i_values, grid.j_values), X
        )
        S = np.abs(np.stack(tables))  # (x, i, j, u)

        above = U[None, :] * X[:, None] > 1
        split = math.sqrt(X[0] * X[-1])
        predicted, fitted, rows = {}, {}, []
        groups: Dict[str, list] = {"u>1/x:x": [], "u>1/x:u": [], "u<=1/x:x": [], "u<=1/x:u": []}
        constants = {"u>1/x": [0.0, 0.0], "u<=1/x": [0.0, 0.0]}

        for a_idx, i in enumerate(grid.i_values):
            for b_idx, j in enumerate(grid.j_values):
                values = S[:, a_idx, b_idx, :]
                x_exp, u_exp = (i, j) if j <= i else (j, i)
                label = f"S^{i},{j}"
                regimes = (
                    ("u>1/x", above, x_exp, -(u_exp + 1)),
                    ("u<=1/x", ~above, i + j + 1, 0),
                )
                for regime, mask, px, pu in regimes:
                    bound = X[:, None] ** px * U[None, :] ** pu
                    ratio = np.where(mask, values / bound, 0.0)
                    constants[regime][0] = max(constants[regime][0], float(ratio.max()))
                    constants[regime][1] = max(constants[regime][1], float(ratio[X <= split].max()))

                    key = f"{label} {regime}"
                    predicted[f"{key}:x"], predicted[f"{key}:u"] = float(px), float(pu)
                    for axis, envelope in (
                        ("x", self._x_envelope(X, U, values, mask, pu)),
                        ("u", self._u_envelope(X, U, values, mask, px, regime)),
                    ):
                        coords, env, where = envelope
                        if len(coords) < 3:
                            continue
                        log_c, log_e = np.log(coords), np.log(env)
                        slope, intercept, _ = _fit(log_c, log_e)
                        fitted[f"{key}:{axis}"] = slope
                        groups[f"{regime}:{axis}"].append((log_c, log_e, slope, intercept))
                        for xi, ui in where:
                            rows.append(
                                BoundRow(
                                    label=f"{key}:{axis}",
                                    x=float(X[xi]),
                                    u=float(U[ui]),
                                    lhs=float(values[xi, ui]),
                                    bound=float(bound[xi, ui]),
                                    ratio=float(ratio[xi, ui]),
                                )
                            )

        r_squared = {name: _pooled_r_squared(g) for name, g in groups.items()}
        constant = max(c[0] for c in constants.values())
        growth = max(c[0] / c[1] if c[1] > 0 else math.inf for c in constants.values())
        report = self._report(
            "sum_bounds",
            None,
            predicted,
            fitted,
            r_squared,
            constant,
            growth,
            grid=f"x in [{X[0]:.6g}, {X[-1]:.6g}] ({len(X)}), u in [{U[0]:.6g}, {U[-1]:.6g}] ({len(U)})",
            rows=rows,
        )
        logger.info(
            f"S^{{i,j}} bound check: constant {constant:.4g}, growth {growth:.3g}, "
            f"max exponent error {report.max_exponent_error:.3f}, passed {report.passed}"
        )
        return report

    def check_alt_sum_saturation(
        self,
        kernel: Kernel,
        p: int,
        w_min: float = 2.0 ** 4,
        w_max: float = 2.0 ** 13,
        points_per_dyad: int = 64,
        tail_dyads: int = 3,
    ) -> BoundFitReport:
        """
        Boundedness of the alternating sum for p <= k - 1, tested as
        saturation: the sup over w <= w_max may exceed the sup over
        w <= w_max / 2^tail_dyads by less than 10%.

        Raises:
            OrderTooHigh: if p > k - 1
            ParameterOutOfRange: if alpha < 1
        """
        self._check_order_regime(kernel)
        if p > kernel.k - 1:
            raise OrderTooHigh(f"saturation check needs p <= k - 1 = {kernel.k - 1}, got {p}")

        dyads = int(round(math.log2(w_max / w_min)))
        w = w_min * 2.0 ** (np.arange(dyads * points_per_dyad + 1) / points_per_dyad)
        values = np.abs(parallel_map(lambda x: self.estimates_service.alt_sum(kernel, p, x), w))

        cutoff = w_max / 2.0 ** tail_dyads
        early = float(values[w <= cutoff * (1 + 1e-12)].max())
        full = float(values.max())
        growth = full / early if early > 0 else (1.0 if full == 0 else math.inf)

        centers, maxima = _octave_maxima(w[:-1], values[:-1], points_per_dyad)
        slope, _, r2 = _fit(np.log(centers), np.log(np.maximum(maxima, 1e-300)))
        rows = [
            BoundRow(label=f"p={p}", w=float(x), lhs=float(v), bound=1.0, ratio=float(v))
            for x, v in zip(w, values)
        ]
        passed = growth < 1.1
        logger.info(f"Alternating sum p={p}: sup {full:.6g}, growth {growth:.4f}, passed {passed}")
        return BoundFitReport(
            estimate="alt_sum_saturation",
            index=p,
            predicted_exponents={"w": 0.0},
            fitted_exponents={"w": slope},
            r_squared={"w": r2},
            constant=full,
            constant_growth=growth,
            passed=passed,
            grid=f"w in [{w_min:.6g}, {w_max:.6g}], {points_per_dyad} per dyad",
            rows=rows,
        )

    def check_alt_sum_bound(
        self,
        kernel: Kernel,
        w_min: float = 2.0 ** 4,
        w_max: float = 2.0 ** 13,
        points_per_dyad: int = 16,
    ) -> BoundFitReport:
        """
        The alternating sum at p = k against q^k(1 - 1/w) + w Q_k(1/w).

        Passes when the fitted exponent of the per-dyad maximum ratio does
        not exceed EXPONENT_TOLERANCE.

        Raises:
            ParameterOutOfRange: if alpha < 1
        """
        self._check_order_regime(kernel)
        k = kernel.k
        dyads = int(round(math.log2(w_max / w_min)))
        w = w_min * 2.0 ** (np.arange(dyads * points_per_dyad) / points_per_dyad)

        def point(x):
            lhs = abs(self.estimates_service.alt_sum(kernel, k, x))
            bound = float(kernel.qk(1.0 - 1.0 / x)) + x * self.kernel_service.eval_Qk(kernel, 1.0 / x)
            return lhs, bound

        pairs = parallel_map(point, w)
        lhs = np.array([a for a, _ in pairs])
        bound = np.array([b for _, b in pairs])
        ratio = lhs / bound
        return self._non_growth_report(
            "alt_sum_bound", None, w, lhs, bound, ratio, points_per_dyad,
            grid=f"w in [{w_min:.6g}, {w_max:.6g}), {points_per_dyad} per dyad",
        )

    def decay_integral(
        self, kernel: Kernel, r: int, i: int, w: float, t: float, part: str = "full"
    ) -> float:
        """
        Integral of u^{r-i} (u - t)^{k-alpha} G_i(w, u) over [t, pi], or over
        its "near" part [t, t + 1/w] or "far" part [t + 1/w, pi].

        The near part carries the endpoint singularity as an algebraic
        quadrature weight; the far part is oscillatory with frequency ~ w.
        """
        if part not in ("full", "near", "far"):
            raise ParameterOutOfRange(f"unknown part '{part}'")
        gap = kernel.k - kernel.alpha
        split = min(t + 1.0 / w, math.pi)

        def G(u):
            return self.estimates_service.G_direct(kernel, i, w, u, r=r)

        near = far = 0.0
        if part in ("full", "near"):
            near = integrate_scalar(
                lambda u: u ** (r - i) * G(u),
                t,
                split,
                epsabs=_DECAY_EPSABS,
                epsrel=_DECAY_EPSREL,
                weight="alg",
                wvar=(gap, 0.0),
            )
        if part in ("full", "far") and split < math.pi:
            far = integrate_scalar(
                lambda u: u ** (r - i) * (u - t) ** gap * G(u),
                split,
                math.pi,
                epsabs=_DECAY_EPSABS,
                epsrel=_DECAY_EPSREL,
                limit=max(settings.QUAD_LIMIT, int(4 * w)),
            )
        return near + far

    def check_decay_estimates(
        self,
        kernel: Kernel,
        r: int,
        grids: Optional[DecayGrids] = None,
        i_values: Optional[Sequence[int]] = None,
        estimates: Sequence[str] = DECAY_ESTIMATES,
    ) -> List[BoundFitReport]:
        """
        Decay estimates of the split u-integrals of G_i.

        "near_decay": near part at t = pi / (2w), predicted w^{alpha-r+1}.
        "far_decay": far part at t = pi / (2w), predicted w^{alpha-r+1}.
        "short_range_average": integral of |full| / w^2 over w in [1, pi/t], predicted t^{r-alpha}.
        "long_range": full part for wt > pi against
              w^{alpha-k} q^k(1 - pi/wt) / t^{k-r+1} + w^{alpha-k+1} Q_k(pi/wt) / t^{k-r},
              passing when the ratio does not grow.
        "tail_average": integral of |full| / w^2 over w in [pi/t, span pi/t], predicted t^{r-alpha}.

        Raises:
            ParameterOutOfRange: unless 0 <= r < alpha
            IndexOutOfRange: if some i exceeds min(k - r, r)
            BudgetExceeded: if the estimated work exceeds TERM_EVALUATION_CAP
        """
        if not 0 <= r < kernel.alpha:
            raise ParameterOutOfRange("requires r < alpha")
        unknown = set(estimates) - set(DECAY_ESTIMATES)
        if unknown:
            raise ParameterOutOfRange(f"unknown decay estimates {sorted(unknown)}")
        grids = grids or DecayGrids()
        m = self.estimates_service.derivative_index_bound(kernel, r)
        i_values = list(range(m + 1)) if i_values is None else list(i_values)
        for i in i_values:
            self.estimates_service.G_direct(kernel, i, 1.0, 1.0, r=r)

        plan = self._decay_plan(grids, estimates)
        cost = len(i_values) * sum(self._integral_cost(w) for w in plan)
        if cost > settings.TERM_EVALUATION_CAP:
            raise BudgetExceeded(
                f"Decay checks need about {cost:.3g} term evaluations, cap is {settings.TERM_EVALUATION_CAP}"
            )
        logger.info(f"Decay checks {list(estimates)} for r={r}, i in {i_values}: about {cost:.3g} term evaluations")

        reports = []
        for i in i_values:
            for estimate in estimates:
                check = {
                    "near_decay": self._short_range,
                    "far_decay": self._short_range,
                    "short_range_average": self._averaged,
                    "long_range": self._long_range,
                    "tail_average": self._averaged,
                }[estimate]
                report = check(kernel, r, i, grids, estimate)
                logger.info(
                    f"Decay estimate {estimate}, i={i}: fitted {report.fitted_exponents}, passed {report.passed}"
                )
                reports.append(report)
        return reports

    def _short_range(self, kernel, r, i, grids: DecayGrids, estimate: str) -> BoundFitReport:
        part = "near" if estimate == "near_decay" else "far"
        w = np.asarray(grids.w_values)
        lhs = np.abs(
            parallel_map(lambda x: self.decay_integral(kernel, r, i, x, math.pi / (2 * x), part), w)
        )
        exponent = kernel.alpha - r + 1
        bound = w ** exponent
        slope, _, r2 = _fit(np.log(w), np.log(np.maximum(lhs, 1e-300)))
        rows = [
            BoundRow(label=f"{part} i={i}", w=float(x), t=math.pi / (2 * x), lhs=float(a), bound=float(b), ratio=float(a / b))
            for x, a, b in zip(w, lhs, bound)
        ]
        return self._report(
            estimate, i, {"w": exponent}, {"w": slope}, {"w": r2},
            float(np.max(lhs / bound)), self._growth(w, lhs / bound),
            grid=f"w in [{w[0]:.6g}, {w[-1]:.6g}] ({len(w)}), t = pi / (2w)",
            rows=rows,
        )

    def _averaged(self, kernel, r, i, grids: DecayGrids, estimate: str) -> BoundFitReport:
        if estimate == "short_range_average":
            t_values = np.asarray(grids.short_range_t_values)
            limits = [(1.0, math.pi / t) for t in t_values]
        else:
            t_values = np.asarray(grids.tail_t_values)
            limits = [(math.pi / t, grids.tail_span * math.pi / t) for t in t_values]

        lhs = []
        for t, (lo, hi) in zip(t_values, limits):
            nodes = self._log_nodes(lo, hi, grids.nodes_per_octave)
            values = parallel_map(lambda x: abs(self.decay_integral(kernel, r, i, x, t)) / x, nodes)
            # midpoint rule in log w
            lhs.append(math.log(hi / lo) / len(nodes) * math.fsum(values))
        lhs = np.asarray(lhs)

        exponent = -(kernel.alpha - r)
        bound = t_values ** exponent
        slope, _, r2 = _fit(np.log(t_values), np.log(np.maximum(lhs, 1e-300)))
        rows = [
            BoundRow(label=f"averaged i={i}", t=float(t), lhs=float(a), bound=float(b), ratio=float(a / b))
            for t, a, b in zip(t_values, lhs, bound)
        ]
        growth = self._growth(1.0 / t_values[::-1], (lhs / bound)[::-1])
        return self._report(
            estimate, i, {"t": exponent}, {"t": slope}, {"t": r2},
            float(np.max(lhs / bound)), growth,
            grid=f"t in [{t_values[0]:.6g}, {t_values[-1]:.6g}] ({len(t_values)}), "
            f"{grids.nodes_per_octave} nodes per octave in w",
            rows=rows,
        )

    def _long_range(self, kernel, r, i, grids: DecayGrids, estimate: str) -> BoundFitReport:
        t = grids.long_range_t
        per_octave = grids.nodes_per_octave
        w0 = 2 * math.pi / t
        w = w0 * 2.0 ** (np.arange(grids.long_range_octaves * per_octave) / per_octave)
        k, alpha = kernel.k, kernel.alpha

        def point(x):
            lhs = abs(self.decay_integral(kernel, r, i, x, t))
            z = math.pi / (x * t)
            bound = (
                x ** (alpha - k) * float(kernel.qk(1.0 - z)) / t ** (k - r + 1)
                + x ** (alpha - k + 1) * self.kernel_service.eval_Qk(kernel, z) / t ** (k - r)
            )
            return lhs, bound

        pairs = parallel_map(point, w)
        lhs = np.array([a for a, _ in pairs])
        bound = np.array([b for _, b in pairs])
        return self._non_growth_report(
            estimate, i, w, lhs, bound, lhs / bound, per_octave,
            grid=f"t = {t:.6g}, w in [{w[0]:.6g}, {w[-1]:.6g}], {per_octave} per octave",
            t=t,
        )

    def _non_growth_report(
        self, estimate, index, w, lhs, bound, ratio, per_octave, grid, t=None
    ) -> BoundFitReport:
        centers, maxima = _octave_maxima(w, ratio, per_octave)
        slope, _, r2 = _fit(np.log(centers), np.log(np.maximum(maxima, 1e-300)))
        growth = self._growth(w, ratio)
        passed = slope <= settings.EXPONENT_TOLERANCE and growth <= settings.CONSTANT_GROWTH_LIMIT
        rows = [
            BoundRow(label="ratio", w=float(x), t=t, lhs=float(a), bound=float(b), ratio=float(c))
            for x, a, b, c in zip(w, lhs, bound, ratio)
        ]
        return BoundFitReport(
            estimate=estimate,
            index=index,
            predicted_exponents={"ratio": 0.0},
            fitted_exponents={"ratio": slope},
            r_squared={"ratio": r2},
            constant=float(np.max(ratio)),
            constant_growth=growth,
            passed=passed,
            grid=grid,
            rows=rows,
        )

    def _report(
        self, estimate, index, predicted, fitted, r_squared, constant, growth, grid, rows
    ) -> BoundFitReport:
        exponents_ok = all(
            abs(fitted[key] - value) <= settings.EXPONENT_TOLERANCE
            for key, value in predicted.items()
            if key in fitted
        )
        fits_ok = all(
            not np.isfinite(value) or value >= settings.MIN_R_SQUARED for value in r_squared.values()
        )
        stable = growth is not None and growth <= settings.CONSTANT_GROWTH_LIMIT
        return BoundFitReport(
            estimate=estimate,
            index=index,
            predicted_exponents=predicted,
            fitted_exponents=fitted,
            r_squared=r_squared,
            constant=constant,
            constant_growth=growth,
            passed=exponents_ok and fits_ok and stable,
            grid=grid,
            rows=rows,
        )

    def _x_envelope(self, X, U, values, mask, pu):
        coords, env, where = [], [], []
        scaled = values * U[None, :] ** (-pu)
        for xi in range(len(X)):
            candidates = np.flatnonzero(mask[xi])
            if len(candidates) < 4:
                continue
            best = candidates[np.argmax(scaled[xi, candidates])]
            if scaled[xi, best] > 0:
                coords.append(X[xi])
                env.append(scaled[xi, best])
                where.append((xi, best))
        return np.asarray(coords), np.asarray(env), where

    def _u_envelope(self, X, U, values, mask, px, regime):
        if regime == "u>1/x":
            window = (U >= _MIN_X_SPAN / X[-1]) & (U <= _MAX_U_FOR_X_SPAN)
        else:
            window = (U >= 1.0 / X[-1]) & (U * X[0] <= 1.0 / 2)
        scaled = values / X[:, None] ** px
        coords, env, where = [], [], []
        for ui in np.flatnonzero(window):
            candidates = np.flatnonzero(mask[:, ui])
            if len(candidates) < 4:
                continue
            best = candidates[np.argmax(scaled[candidates, ui])]
            if scaled[best, ui] > 0:
                coords.append(U[ui])
                env.append(scaled[best, ui])
                where.append((best, ui))
        return np.asarray(coords), np.asarray(env), where

    def _growth(self, scale: np.ndarray, ratio: np.ndarray) -> float:
        """Sup of ratio over the whole grid against the sup over its lower half in log scale."""
        scale = np.asarray(scale, dtype=float)
        split = math.sqrt(scale.min() * scale.max())
        early = float(np.max(ratio[scale <= split]))
        full = float(np.max(ratio))
        if early == 0:
            return 1.0 if full == 0 else math.inf
        return full / early

    def _decay_plan(self, grids: DecayGrids, estimates: Sequence[str]) -> List[float]:
        plan: List[float] = []
        if "near_decay" in estimates or "far_decay" in estimates:
            plan += list(grids.w_values) * (("near_decay" in estimates) + ("far_decay" in estimates))
        if "short_range_average" in estimates:
            for t in grids.short_range_t_values:
                plan += self._log_nodes(1.0, math.pi / t, grids.nodes_per_octave).tolist()
        if "long_range" in estimates:
            w0 = 2 * math.pi / grids.long_range_t
            count = grids.long_range_octaves * grids.nodes_per_octave
            plan += (w0 * 2.0 ** (np.arange(count) / grids.nodes_per_octave)).tolist()
        if "tail_average" in estimates:
            for t in grids.tail_t_values:
                plan += self._log_nodes(
                    math.pi / t, grids.tail_span * math.pi / t, grids.nodes_per_octave
                ).tolist()
        return plan

    def _integral_cost(self, w: float) -> float:
        # 21-point Gauss-Kronrod panels, about w / 2 of them, each summing w terms
        return 21.0 * (w / 2 + 10) * (w + 1)

    def _log_nodes(self, lo: float, hi: float, per_octave: int) -> np.ndarray:
        count = max(int(math.ceil(per_octave * math.log2(hi / lo))), 1)
        h = math.log(hi / lo) / count
        return lo * np.exp((np.arange(count) + 0.5) * h)

    def _check_order_regime(self, kernel: Kernel) -> None:
        if kernel.alpha < 1:
            raise ParameterOutOfRange("alternating-sum bounds need alpha >= 1")
