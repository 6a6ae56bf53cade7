"""
Experiment runs: config loading and validation, dispatch to the numeric
services, CSV artifacts and the run manifest.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from nqlab import __version__
from nqlab.core.config import settings
from nqlab.core.errors import CheckFailed, ConfigInvalid, NqLabError
from nqlab.core.plugins import load_callable
from nqlab.core.reporting import rows_from_models, write_csv, write_manifest
from nqlab.models.kernel import KERNEL_LIBRARY
from nqlab.models.periodic import make_function
from nqlab.models.series import rule_series
from nqlab.schemas.estimates import BoundFitReport, DecayGrids, SumGrid
from nqlab.schemas.experiment import (
    DECAY,
    CheckResult,
    Command,
    Estimate,
    ExperimentConfig,
    RunManifest,
)
from nqlab.schemas.kernel import KernelFamily
from nqlab.schemas.transform import MeanSchedule, Verdict
from nqlab.services.bounds_service import BoundsService, default_sum_grid, jitter
from nqlab.services.estimates_service import EstimatesService
from nqlab.services.fourier_service import FourierService
from nqlab.services.hypothesis_service import HypothesisService
from nqlab.services.kernel_service import KernelService
from nqlab.services.transform_service import TransformService

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
CHECKS_NAME = "checks.csv"

DEFAULT_MEAN_TOLERANCE = 1e-6
DEFAULT_SPLIT_TOLERANCE = 1e-6
DEFAULT_REPRESENTATION_TOLERANCE = 1e-6
DEFAULT_REPRESENTATION_W = (5.0, 12.5, 30.0)
DEFAULT_REPRESENTATION_U = (0.3, 1.0, 3.0)

CHECK_FIELDS = ["name", "passed", "value", "limit", "detail", "artifact"]
CONDITION_FIELDS = ["condition", "name", "passed", "witness", "value", "detail"]
BOUND_ROW_FIELDS = ["index", "label", "x", "u", "w", "t", "lhs", "bound", "ratio"]
FIT_FIELDS = [
    "estimate", "index", "key", "predicted", "fitted", "r_squared",
    "constant", "constant_growth", "violation_count", "passed",
]


@dataclass
class RunContext:
    config: ExperimentConfig
    out_dir: Path
    rng: np.random.Generator
    artifacts: List[str] = field(default_factory=list)
    bound_rows: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    fit_rows: List[Dict[str, Any]] = field(default_factory=list)

    def write(self, name: str, rows: List[Dict[str, Any]], fieldnames: Sequence[str]) -> str:
        write_csv(self.out_dir / name, rows, fieldnames)
        if name not in self.artifacts:
            self.artifacts.append(name)
        return name


class ExperimentService:
    """
    Service behind the command-line front end.
    """

    def __init__(self, kernel_service: Optional[KernelService] = None):
        self.kernel_service = kernel_service or KernelService()
        self.transform_service = TransformService(self.kernel_service)
        self.fourier_service = FourierService()
        self.hypothesis_service = HypothesisService(self.fourier_service)
        self.estimates_service = EstimatesService(self.kernel_service)
        self.bounds_service = BoundsService(self.estimates_service)

    def read_config(self, path: Union[str, Path]) -> Dict[str, Any]:
        """
        Read a JSON experiment document.

        Raises:
            ConfigInvalid: if the file cannot be read or is not a JSON object
        """
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigInvalid(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigInvalid("config must be a JSON object")
        return raw

    def validate(self, raw: Union[Dict[str, Any], ExperimentConfig]) -> List[str]:
        """
        Structural, range and reference checks without running numerics.

        Returns:
            Diagnostics, empty when the config is valid
        """
        _, diagnostics = self._parse(raw)
        return diagnostics

    def load(self, raw: Union[Dict[str, Any], ExperimentConfig]) -> ExperimentConfig:
        """
        Raises:
            ConfigInvalid: carrying every diagnostic of validate
        """
        config, diagnostics = self._parse(raw)
        if diagnostics:
            raise ConfigInvalid(diagnostics)
        return config

    def run(self, config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> RunManifest:
        """
        Run one experiment and write its CSV artifacts and manifest.

        Returns:
            RunManifest with exit code 0

        Raises:
            CheckFailed: if an enabled check fails (manifest attached)
            NumericalFailure: if a computation fails; the manifest is still written
        """
        out_dir = Path(out_dir or config.out or Path("results") / config.command.value)
        ctx = RunContext(config=config, out_dir=out_dir, rng=np.random.default_rng(config.seed))
        logger.info(f"Running {config.command.value} into {out_dir}")
        handlers = {
            Command.KERNEL_CHECK: self._kernel_check,
            Command.MEAN: self._mean,
            Command.ABS_DIAGNOSTIC: self._abs_diagnostic,
            Command.FOURIER_EXPERIMENT: self._fourier_experiment,
            Command.LEMMA_VERIFY: self._lemma_verify,
        }

        start = time.perf_counter()
        checks: List[CheckResult] = []
        failure: Optional[NqLabError] = None
        try:
            checks = handlers[config.command](ctx)
        except NqLabError as e:
            logger.error(f"{config.command.value} failed: {e}", exc_info=True)
            failure = e
        elapsed = time.perf_counter() - start

        ctx.write(CHECKS_NAME, rows_from_models(checks, CHECK_FIELDS), CHECK_FIELDS)
        failed = [c.name for c in checks if c.passed is False]
        if failure is not None:
            exit_code = failure.exit_code
        else:
            exit_code = 1 if failed else 0

        manifest = RunManifest(
            tool=settings.APP_NAME,
            version=__version__,
            command=config.command,
            config=config.model_dump(mode="json"),
            seed=config.seed,
            wall_time_seconds=elapsed,
            checks=checks,
            artifacts=ctx.artifacts + [MANIFEST_NAME],
            exit_code=exit_code,
            error=None if failure is None else f"{type(failure).__name__}: {failure}",
        )
        write_manifest(out_dir / MANIFEST_NAME, manifest)
        logger.info(f"{config.command.value} finished in {elapsed:.2f}s with exit code {exit_code}")

        if failure is not None:
            raise failure
        if failed:
            raise CheckFailed(f"checks failed: {', '.join(failed)}", manifest=manifest)
        return manifest

    def _parse(self, raw) -> Tuple[Optional[ExperimentConfig], List[str]]:
        if isinstance(raw, ExperimentConfig):
            config = raw
        else:
            try:
                config = ExperimentConfig.model_validate(raw)
            except ValidationError as e:
                return None, [self._diagnostic(error) for error in e.errors()]
        return config, self._unresolved_references(config)

    def _diagnostic(self, error: Dict[str, Any]) -> str:
        message = error["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        location = ".".join(str(part) for part in error.get("loc", ()))
        return f"{location}: {message}" if location else message

    def _unresolved_references(self, config: ExperimentConfig) -> List[str]:
        diagnostics = []
        kernel = config.kernel
        if kernel is not None and kernel.family == KernelFamily.USER_DEFINED:
            references = list(kernel.derivatives)
            if kernel.function not in KERNEL_LIBRARY:
                references.insert(0, kernel.function)
            for reference in references:
                try:
                    load_callable(reference)
                except NqLabError as e:
                    diagnostics.append(f"kernel: {e}")
        if config.series is not None and config.series.rule is not None:
            try:
                rule_series(config.series.rule, **config.series.params)
            except NqLabError as e:
                diagnostics.append(f"series: {e}")
        if config.function is not None:
            try:
                make_function(config.function.name, **config.function.params)
            except NqLabError as e:
                diagnostics.append(f"function: {e}")
        return diagnostics

    def _kernel_check(self, ctx: RunContext) -> List[CheckResult]:
        config = ctx.config
        kernel = self.kernel_service.from_spec(config.kernel)
        tol = config.tolerance or 1e-8
        report = self.kernel_service.check_admissibility(kernel, config.t_grid, tol)
        artifact = ctx.write(
            "conditions.csv", rows_from_models(report.conditions, CONDITION_FIELDS), CONDITION_FIELDS
        )
        checks = [
            CheckResult(
                name=f"condition_{c.condition}",
                passed=c.passed,
                value=c.value,
                limit=tol,
                detail=c.name,
                artifact=artifact,
            )
            for c in report.conditions
        ]

        tail = self.kernel_service.check_tail_integrability(kernel)
        rows = [
            {
                "level": level,
                "partial": partial,
                "increment": increment,
                "ratio": tail.ratios[j - 1] if j > 0 else None,
            }
            for j, (level, partial, increment) in enumerate(
                zip(tail.levels, tail.partials, tail.increments)
            )
        ]
        artifact = ctx.write("tail_integrability.csv", rows, ["level", "partial", "increment", "ratio"])
        checks.append(
            CheckResult(
                name="tail_integrability",
                passed=tail.passed,
                value=tail.ratios[-1],
                limit=0.99,
                artifact=artifact,
            )
        )
        return checks

    def _mean(self, ctx: RunContext) -> List[CheckResult]:
        config = ctx.config
        kernel = self.kernel_service.from_spec(config.kernel)
        series = self.transform_service.series_from_spec(config.series)
        points = self.transform_service.means(kernel, series, MeanSchedule(w_values=config.w_values))
        artifact = ctx.write("means.csv", rows_from_models(points, ["w", "mean"]), ["w", "mean"])

        last = points[-1]
        if config.expect_sum is None:
            return [CheckResult(name="mean", value=last.mean, detail=f"w={last.w:g}", artifact=artifact)]
        tol = config.tolerance or DEFAULT_MEAN_TOLERANCE
        deviation = abs(last.mean - config.expect_sum)
        return [
            CheckResult(
                name="mean",
                passed=deviation <= tol,
                value=last.mean,
                limit=tol,
                detail=f"deviation {deviation:.3e} from {config.expect_sum:g} at w={last.w:g}",
                artifact=artifact,
            )
        ]

    def _abs_diagnostic(self, ctx: RunContext) -> List[CheckResult]:
        config = ctx.config
        kernel = self.kernel_service.from_spec(config.kernel)
        series = self.transform_service.series_from_spec(config.series)
        report = self.transform_service.abs_summability_diagnostic(
            kernel, series, config.A, config.W_max, config.points_per_dyad
        )
        fields = ["W", "partial_integral", "increment"]
        artifact = ctx.write(
            "abs_partial_integrals.csv", rows_from_models(report.abs_partial_integrals, fields), fields
        )
        ctx.write("means.csv", rows_from_models(report.means, ["w", "mean"]), ["w", "mean"])

        expected = config.expect_verdict or Verdict.CONVERGENT_EVIDENCE
        return [
            CheckResult(
                name="verdict",
                passed=report.verdict == expected,
                value=report.fitted_slope,
                limit=settings.SLOPE_CONVERGENT,
                detail=f"{report.verdict.value}, expected {expected.value}",
                artifact=artifact,
            ),
            CheckResult(name="total", value=report.total, artifact=artifact),
        ]

    def _fourier_experiment(self, ctx: RunContext) -> List[CheckResult]:
        config = ctx.config
        f = self.fourier_service.function_from_spec(config.function)
        spec = self.fourier_service.resolve_spec(f, config.derived)
        model = self.fourier_service.fourier_coefficients(
            f, max(config.N, config.n_max), config.quad_nodes
        )
        split = self.fourier_service.split_table(
            f, spec, config.n_max, model=model, beta_method=config.beta_method
        )
        fields = ["n", "alpha_n", "beta_n", "derived_term", "deviation"]
        artifact = ctx.write("split.csv", rows_from_models(split, fields), fields)
        tol = config.tolerance or DEFAULT_SPLIT_TOLERANCE
        worst = max(row.deviation / (1 + row.n ** spec.r) for row in split)
        checks = [
            CheckResult(
                name="split",
                passed=worst <= tol,
                value=worst,
                limit=tol,
                detail=f"theta={spec.theta}",
                artifact=artifact,
            )
        ]

        reports = [self.hypothesis_service.check_theorem1(f, spec, eps_list=config.eps_list)]
        if spec.rho >= 0:
            reports.append(self.hypothesis_service.check_theorem2(f, spec, eps_list=config.eps_list))

        delta = config.cesaro_delta
        rows, partials = [], []
        for report in reports:
            order = None if delta is None else self.hypothesis_service.cesaro_order(spec, delta, report.theorem)
            h0 = report.H_beta_at_0plus
            rows.append(
                {
                    "theorem": report.theorem,
                    "order": report.order,
                    "H_beta_at_0plus": None if h0 is None else h0.value,
                    "zero_limit_holds": None if h0 is None else h0.holds,
                    "variation_verdict": report.variation_verdict,
                    "relative_increment": report.relative_increment,
                    "increment_ratio": report.increment_ratio,
                    "hypotheses_hold": report.hypotheses_hold,
                    "cesaro_order": order,
                    "failure": report.failure,
                }
            )
            partials.extend(
                {"theorem": report.theorem, "eps": p.eps, "value": p.value}
                for p in report.variation_integral_partials
            )
        artifact = ctx.write("hypotheses.csv", rows, list(rows[0]))
        ctx.write("variation_partials.csv", partials, ["theorem", "eps", "value"])

        for report in reports:
            hold = report.hypotheses_hold
            expected = config.expect_hypotheses
            checks.append(
                CheckResult(
                    name=f"{report.theorem.value}_hypotheses",
                    passed=None if expected is None else hold == expected,
                    detail=f"hold={hold}, verdict {report.variation_verdict.value}",
                    artifact=artifact,
                )
            )
        return checks

    def _lemma_verify(self, ctx: RunContext) -> List[CheckResult]:
        config = ctx.config
        kernel = self.kernel_service.from_spec(config.kernel) if config.kernel else None
        checks: List[CheckResult] = []
        for estimate in dict.fromkeys(config.estimates):
            if estimate == Estimate.SUM_BOUNDS:
                checks.append(self._record_fit(ctx, self.bounds_service.check_sum_bounds(self._sum_grid(ctx))))
            elif estimate == Estimate.REPRESENTATION:
                checks.append(self._representation(ctx, kernel))
            elif estimate == Estimate.ALT_SUM_BOUND:
                checks.append(self._record_fit(ctx, self.bounds_service.check_alt_sum_bound(kernel)))
            elif estimate == Estimate.ALT_SUM_SATURATION:
                report = self.bounds_service.check_alt_sum_saturation(kernel, config.p)
                checks.append(self._record_fit(ctx, report))
            elif estimate == Estimate.RIESZ_IDENTITY:
                checks.extend(self._riesz_identity(ctx))

        decay = [e.value for e in dict.fromkeys(config.estimates) if e in DECAY]
        if decay:
            reports = self.bounds_service.check_decay_estimates(
                kernel, config.r, self._decay_grids(ctx), config.i_values, estimates=decay
            )
            checks.extend(self._record_fit(ctx, report) for report in reports)

        for estimate, rows in ctx.bound_rows.items():
            ctx.write(f"{estimate}_rows.csv", rows, BOUND_ROW_FIELDS)
        if ctx.fit_rows:
            ctx.write("fits.csv", ctx.fit_rows, FIT_FIELDS)
        return checks

    def _record_fit(self, ctx: RunContext, report: BoundFitReport) -> CheckResult:
        rows = ctx.bound_rows.setdefault(report.estimate, [])
        rows.extend({"index": report.index, **row.model_dump()} for row in report.rows)
        keys = sorted(set(report.predicted_exponents) | set(report.fitted_exponents))
        for key in keys:
            ctx.fit_rows.append(
                {
                    "estimate": report.estimate,
                    "index": report.index,
                    "key": key,
                    "predicted": report.predicted_exponents.get(key),
                    "fitted": report.fitted_exponents.get(key),
                    "r_squared": report.r_squared.get(key),
                    "constant": report.constant,
                    "constant_growth": report.constant_growth,
                    "violation_count": report.violation_count,
                    "passed": report.passed,
                }
            )
        name = report.estimate if report.index is None else f"{report.estimate}[i={report.index}]"
        return CheckResult(
            name=name,
            passed=report.passed,
            value=report.max_exponent_error,
            limit=settings.EXPONENT_TOLERANCE,
            detail=report.detail,
            artifact="fits.csv",
        )

    def _representation(self, ctx: RunContext, kernel) -> CheckResult:
        config = ctx.config
        w_values = self._maybe_jitter(ctx, config.w_values or list(DEFAULT_REPRESENTATION_W))
        u_values = self._maybe_jitter(ctx, config.u_values or list(DEFAULT_REPRESENTATION_U))
        lattice = self.estimates_service.representation_lattice(
            kernel, config.r, w_values, u_values, config.i_values
        )
        fields = ["i", "w", "u", "direct", "representation", "relative_error"]
        artifact = ctx.write("representation.csv", rows_from_models(lattice, fields), fields)
        tol = config.tolerance or DEFAULT_REPRESENTATION_TOLERANCE
        worst = max(c.relative_error for c in lattice)
        return CheckResult(
            name="representation",
            passed=worst <= tol,
            value=worst,
            limit=tol,
            detail=f"{len(lattice)} lattice points",
            artifact=artifact,
        )

    def _riesz_identity(self, ctx: RunContext) -> List[CheckResult]:
        config = ctx.config
        riesz = config.riesz
        rows, checks = [], []
        for k in riesz.k_values:
            deviation = self.estimates_service.check_riesz_identity(riesz.lam, riesz.a, k, riesz.x, riesz.step)
            limit = config.tolerance or (1e-6 if k == 1 else 1e-4)
            rows.append({"k": k, "x": riesz.x, "step": riesz.step, "deviation": deviation, "limit": limit})
            checks.append(
                CheckResult(
                    name=f"riesz_identity[k={k}]",
                    passed=deviation <= limit,
                    value=deviation,
                    limit=limit,
                    artifact="riesz_identity.csv",
                )
            )
        ctx.write("riesz_identity.csv", rows, ["k", "x", "step", "deviation", "limit"])
        return checks

    def _sum_grid(self, ctx: RunContext) -> SumGrid:
        config = ctx.config
        grid = default_sum_grid()
        if config.x_values is not None and config.u_values is not None:
            grid = SumGrid(x_values=config.x_values, u_values=config.u_values)
        return SumGrid(
            x_values=self._maybe_jitter(ctx, grid.x_values),
            u_values=self._maybe_jitter(ctx, grid.u_values),
            i_values=grid.i_values,
            j_values=grid.j_values,
        )

    def _decay_grids(self, ctx: RunContext) -> DecayGrids:
        grids = ctx.config.decay_grids or DecayGrids()
        return grids.model_copy(update={"w_values": self._maybe_jitter(ctx, grids.w_values)})

    def _maybe_jitter(self, ctx: RunContext, values: Sequence[float]) -> List[float]:
        """Perturb interior grid nodes when jitter is on; endpoints stay fixed."""
        values = [float(v) for v in values]
        if not ctx.config.jitter or len(values) <= 2:
            return values
        return [values[0]] + jitter(values[1:-1], ctx.rng) + [values[-1]]
