import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nqlab.core.errors import DerivativeUnavailable, ParameterOutOfRange
from nqlab.models.kernel import CesaroKernel
from nqlab.schemas.kernel import KernelSpec
from nqlab.services.kernel_service import KernelService

CESARO_CASES = [(0.0, 1.0), (1.0, 0.5), (2.5, 0.4)]


def test_constant_kernel_is_one(constant_kernel):
    np.testing.assert_allclose(constant_kernel.q(np.linspace(0, 1, 11)), 1.0)


def test_cesaro_kernel_values(sqrt_kernel, smooth_kernel):
    assert sqrt_kernel.q(0.0) == pytest.approx(1.5)
    assert smooth_kernel.q(1.0) == 0.0


def test_cesaro_derivatives_match_finite_differences(smooth_kernel):
    h = 1e-5
    for t in (0.1, 0.4, 0.8):
        for order in (1, 2):
            estimate = (smooth_kernel.q_deriv(order - 1, t + h)
                        - smooth_kernel.q_deriv(order - 1, t - h)) / (2 * h)
            assert smooth_kernel.q_deriv(order, t) == pytest.approx(estimate, rel=1e-7)


@pytest.mark.parametrize(
    "alpha,delta",
    [(-1.0, 1.0), (1.0, 0.0), (1.0, 1.5), (2.0, 1.5)],
)
def test_make_cesaro_kernel_rejects_bad_parameters(kernel_service, alpha, delta):
    with pytest.raises(ParameterOutOfRange):
        kernel_service.make_cesaro_kernel(alpha, delta)


def test_integer_alpha_forces_small_delta(kernel_service):
    kernel = kernel_service.make_cesaro_kernel(2.0, 0.5)
    assert kernel.k == 2


def test_eval_Q_endpoints(kernel_service):
    for alpha, delta in CESARO_CASES:
        kernel = kernel_service.make_cesaro_kernel(alpha, delta)
        assert kernel_service.eval_Q(kernel, 0.0) == 0.0
        assert kernel_service.eval_Q(kernel, 1.0, method="quadrature") == pytest.approx(1.0, abs=1e-10)


def test_eval_Q_sqrt_kernel(kernel_service, sqrt_kernel):
    assert kernel_service.eval_Q(sqrt_kernel, 0.5) == pytest.approx(0.5 ** 1.5)
    assert kernel_service.eval_Q(sqrt_kernel, 0.5, method="quadrature") == pytest.approx(0.5**1.5, rel=1e-6)


@pytest.mark.parametrize("alpha,delta", CESARO_CASES)
def test_quadrature_Q_matches_closed_form(kernel_service, alpha, delta):
    kernel = kernel_service.make_cesaro_kernel(alpha, delta)
    for t in np.linspace(0.1, 0.9, 9):
        numeric = kernel_service.eval_Q(kernel, t, method="quadrature")
        np.testing.assert_allclose(numeric, t ** (alpha + delta), rtol=1e-8)


def test_eval_Q_rejects_points_outside_unit_interval(kernel_service, sqrt_kernel):
    with pytest.raises(ParameterOutOfRange):
        kernel_service.eval_Q(sqrt_kernel, 1.5)


def test_eval_Qk_examples(kernel_service, constant_kernel, sqrt_kernel):
    assert kernel_service.eval_Qk(constant_kernel, 0.0) == 0.0
    assert kernel_service.eval_Qk(constant_kernel, 0.3) == pytest.approx(0.3)
    assert kernel_service.eval_Qk(sqrt_kernel, 0.25) == pytest.approx(0.75)
    assert kernel_service.eval_Qk(sqrt_kernel, 0.25, method="quadrature") == pytest.approx(0.75, rel=1e-8)


def test_eval_Qk_quadrature_on_smooth_kernel(kernel_service, smooth_kernel):
    for t in (0.2, 0.6, 1.0):
        closed = kernel_service.eval_Qk(smooth_kernel, t)
        numeric = kernel_service.eval_Qk(smooth_kernel, t, method="quadrature")
        assert numeric == pytest.approx(closed, rel=1e-8)


def test_eval_Qk_requires_kth_derivative(kernel_service):
    kernel = kernel_service.make_user_kernel(1.5, lambda t: 2.0 * (1 - t))
    with pytest.raises(DerivativeUnavailable):
        kernel_service.eval_Qk(kernel, 0.5)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.0),
    st.sampled_from(CESARO_CASES),
)
def test_Q_and_Qk_are_monotone(t1, t2, case):
    service = KernelService()
    kernel = CesaroKernel(*case)
    lo, hi = min(t1, t2), max(t1, t2)
    assert 0.0 <= service.eval_Q(kernel, lo) <= service.eval_Q(kernel, hi) <= 1.0
    assert 0.0 <= service.eval_Qk(kernel, lo) <= service.eval_Qk(kernel, hi)


@pytest.mark.parametrize("alpha,delta", CESARO_CASES)
def test_cesaro_kernels_are_admissible(kernel_service, alpha, delta):
    kernel = kernel_service.make_cesaro_kernel(alpha, delta)
    report = kernel_service.check_admissibility(kernel, tol=1e-8)
    assert len(report.conditions) == 7
    assert [c.condition for c in report.conditions] == list(range(1, 8))
    assert report.passed, [c for c in report.conditions if not c.passed]
    assert report.condition(2).value <= 1e-8


def test_condition7_ratio_is_inverse_delta(kernel_service, smooth_kernel):
    report = kernel_service.check_admissibility(smooth_kernel)
    assert report.condition7_refined_sup == pytest.approx(1 / 0.4, rel=1e-6)


def test_linear_ramp_fails_vanishing_condition(kernel_service):
    kernel = kernel_service.from_spec(
        KernelSpec(family="user_defined", alpha=1.0, function="linear_ramp")
    )
    report = kernel_service.check_admissibility(kernel)
    fourth = report.condition(4)
    assert not fourth.passed
    assert fourth.witness == 1.0
    assert report.condition(1).passed
    assert report.condition(2).passed


def test_parabola_fails_monotone_condition(kernel_service):
    kernel = kernel_service.from_spec(
        KernelSpec(family="user_defined", alpha=1.0, function="parabola")
    )
    report = kernel_service.check_admissibility(kernel)
    assert report.condition(4).passed
    assert not report.condition(6).passed


def test_finite_difference_user_kernel_matches_cesaro(kernel_service, smooth_kernel):
    kernel = kernel_service.make_user_kernel(
        2.5, lambda t: 2.9 * (1 - t) ** 1.9, allow_finite_differences=True
    )
    for t in (0.2, 0.5, 0.8):
        assert kernel.q_deriv(1, t) == pytest.approx(smooth_kernel.q_deriv(1, t), rel=1e-6)
        assert kernel.q_deriv(2, t) == pytest.approx(smooth_kernel.q_deriv(2, t), rel=1e-4)


def test_admissibility_rejects_grid_outside_interval(kernel_service, sqrt_kernel):
    with pytest.raises(ParameterOutOfRange):
        kernel_service.check_admissibility(sqrt_kernel, t_grid=[0.0, 0.5])


@pytest.mark.parametrize("alpha,delta", CESARO_CASES)
def test_tail_integral_increments_shrink(kernel_service, alpha, delta):
    kernel = kernel_service.make_cesaro_kernel(alpha, delta)
    report = kernel_service.check_tail_integrability(kernel)
    assert report.passed
    assert report.ratios[-1] == pytest.approx(2 ** -delta, rel=1e-6)
    assert all(b >= a for a, b in zip(report.partials, report.partials[1:]))
