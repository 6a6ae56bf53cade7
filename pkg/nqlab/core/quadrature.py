"""
Adaptive quadrature used by every service.

Thin layer over QUADPACK (scipy.integrate.quad). Failed integrations are
retried with a larger subdivision limit; divergence diagnoses are surfaced
as NonIntegrable.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple

from scipy import integrate
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from nqlab.core.config import settings
from nqlab.core.errors import NonIntegrable, QuadratureFailure

logger = logging.getLogger(__name__)

# Accept a roundoff-limited result when its error estimate is within this
# factor of the requested tolerance.
_ROUNDOFF_SLACK = 1e3


def integrate_scalar(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: Optional[float] = None,
    epsrel: Optional[float] = None,
    limit: Optional[int] = None,
    points: Optional[Sequence[float]] = None,
    weight: Optional[str] = None,
    wvar=None,
) -> float:
    """
    Integrate func over [a, b].

    Args:
        func: Scalar integrand
        a: Lower limit
        b: Upper limit
        epsabs: Absolute tolerance (defaults to QUAD_EPSABS)
        epsrel: Relative tolerance (defaults to QUAD_EPSREL)
        limit: Initial subdivision limit, multiplied by 4 on every retry
        points: Interior break points (ignored when a weight is used)
        weight: QUADPACK weight name ("alg", "sin", "cos", ...)
        wvar: Weight parameters

    Returns:
        The integral value

    Raises:
        QuadratureFailure: if the target accuracy is not met after all retries
        NonIntegrable: if QUADPACK diagnoses divergence
    """
    if a == b:
        return 0.0
    if b < a:
        return -integrate_scalar(
            func, b, a, epsabs=epsabs, epsrel=epsrel, limit=limit,
            points=points, weight=weight, wvar=wvar,
        )

    epsabs = settings.QUAD_EPSABS if epsabs is None else epsabs
    epsrel = settings.QUAD_EPSREL if epsrel is None else epsrel
    limit = settings.QUAD_LIMIT if limit is None else limit

    breaks = None
    if points is not None and weight is None:
        inner = sorted({float(p) for p in points if a < p < b})
        breaks = inner or None

    for attempt in Retrying(
        stop=stop_after_attempt(settings.QUAD_RETRIES),
        retry=retry_if_exception_type(QuadratureFailure),
        before_sleep=before_sleep_log(logger, logging.WARNING),
        reraise=True,
    ):
        with attempt:
            scale = 4 ** (attempt.retry_state.attempt_number - 1)
            value, _ = _integrate_once(
                func, a, b, epsabs, epsrel, limit * scale, breaks, weight, wvar
            )
            return value


def _integrate_once(
    func, a, b, epsabs, epsrel, limit, points, weight, wvar
) -> Tuple[float, float]:
    kwargs = {"epsabs": epsabs, "epsrel": epsrel, "limit": limit, "full_output": 1}
    if points is not None:
        kwargs["points"] = points
    if weight is not None:
        kwargs["weight"] = weight
        kwargs["wvar"] = wvar

    result = integrate.quad(func, a, b, **kwargs)
    value, abserr = float(result[0]), float(result[1])

    if len(result) > 3:
        message = str(result[3])
        if "divergent" in message:
            raise NonIntegrable(f"Integral over [{a}, {b}] appears divergent: {message}")
        target = max(epsabs, epsrel * abs(value))
        if abserr > _ROUNDOFF_SLACK * target:
            raise QuadratureFailure(
                f"Quadrature over [{a}, {b}] stopped at error {abserr:.3e} "
                f"(target {target:.3e}, limit {limit}): {message}"
            )
        logger.debug(f"Accepted roundoff-limited quadrature on [{a}, {b}]: {message}")

    return value, abserr
