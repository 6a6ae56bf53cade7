import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from nqlab.core.errors import NonIntegrable, ParameterOutOfRange
from nqlab.models.periodic import make_function, trig_polynomial
from nqlab.schemas.fourier import CauchyVerdict, DerivedSeriesSpec, Theorem
from nqlab.services.hypothesis_service import HypothesisService, cauchy_verdict, default_eps_list


def power(gamma_exponent):
    return lambda u: u ** gamma_exponent


def test_fractional_integral_of_zero(hypothesis_service):
    for beta in (0.3, 1.0, 2.5):
        assert hypothesis_service.fractional_integral_H(lambda u: 0.0, beta, 1.3) == 0.0


@pytest.mark.parametrize("g,beta", [(1.0, 0.5), (0.5, 1.5), (2.0, 2.5)])
@pytest.mark.parametrize("t", [0.2, 1.0, 3.0])
def test_fractional_integral_of_powers(hypothesis_service, g, beta, t):
    expected = gamma(g + 1) / gamma(g + beta + 1) * t ** (g + beta)
    value = hypothesis_service.fractional_integral_H(power(g), beta, t)
    np.testing.assert_allclose(value, expected, rtol=1e-6)


def test_fractional_integral_examples(hypothesis_service):
    assert hypothesis_service.fractional_integral_H(power(1.0), 0.5, 1.0) == pytest.approx(gamma(2) / gamma(2.5), rel=1e-6)
    assert hypothesis_service.fractional_integral_H(lambda u: 1.0, 1.0, 0.7) == pytest.approx(0.7)


@pytest.mark.parametrize("g", [-0.5, -0.9, -0.95, -0.99])
def test_fractional_integral_of_slowly_integrable_powers(hypothesis_service, g):
    value = hypothesis_service.fractional_integral_H(power(g), 1.0, 1.0)
    assert value == pytest.approx(gamma(g + 1) / gamma(g + 2), rel=1e-5)


def test_fractional_integral_of_singular_power_with_fractional_order(hypothesis_service):
    value = hypothesis_service.fractional_integral_H(power(-0.9), 0.5, 2.0)
    expected = gamma(0.1) / gamma(0.6) * 2.0 ** -0.4
    assert value == pytest.approx(expected, rel=1e-3)


def test_fractional_integral_semigroup(hypothesis_service):
    def inner(u):
        return hypothesis_service.fractional_integral_H(power(1.0), 1.5, u)

    for t in (0.5, 2.0):
        composed = hypothesis_service.fractional_integral_H(inner, 0.5, t)
        direct = hypothesis_service.fractional_integral_H(power(1.0), 2.0, t)
        np.testing.assert_allclose(composed, direct, rtol=1e-6)
        np.testing.assert_allclose(direct, t ** 3 / 6, rtol=1e-8)


@pytest.mark.parametrize("g", [0.0, -0.5])
def test_zero_limit_extrapolates_power_laws(hypothesis_service, g):
    grid = [1.0, 0.5, 0.25]
    report = hypothesis_service.check_theorem1_for_h(power(g), 1.0, grid=grid, eps_list=[math.pi / 2, math.pi / 4])
    h0 = report.H_beta_at_0plus
    assert h0.samples == pytest.approx([t ** (g + 1) / (g + 1) for t in grid], rel=1e-6)
    assert abs(h0.value) < 1e-6
    assert h0.holds


def test_fractional_integral_rejects_bad_order(hypothesis_service):
    with pytest.raises(ParameterOutOfRange):
        hypothesis_service.fractional_integral_H(power(1.0), 0.0, 1.0)


def test_fractional_integral_detects_nonintegrable(hypothesis_service):
    with pytest.raises(NonIntegrable):
        hypothesis_service.fractional_integral_H(lambda u: 1.0 / (u * u), 0.5, 1.0)
    with pytest.raises(NonIntegrable):
        hypothesis_service.fractional_integral_H(lambda u: 1.0 / u, 1.5, 2.0)


def test_fractional_integral_of_integrable_singularity(hypothesis_service):
    value = hypothesis_service.fractional_integral_H(power(-0.5), 1.0, 1.0)
    assert value == pytest.approx(2.0, rel=1e-6)


def test_h_beta_examples(hypothesis_service):
    h = power(1.0)
    assert hypothesis_service.h_beta(h, 0.0, 0.4) == 0.4
    assert hypothesis_service.h_beta(h, 1.0, 0.4) == pytest.approx(0.2)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(min_value=-3.0, max_value=3.0),
    st.one_of(st.just(0.0), st.floats(min_value=0.05, max_value=3.0)),
    st.floats(min_value=0.01, max_value=math.pi),
)
def test_h_beta_of_constant_is_constant(c, beta, t):
    value = HypothesisService().h_beta(lambda u: c, beta, t)
    assert value == pytest.approx(c, rel=1e-7, abs=1e-9)


def test_fractional_table(hypothesis_service):
    table = hypothesis_service.fractional_table(power(1.0), 1.0, [1.0, 0.5, 2.0])
    assert table.t == [0.5, 1.0, 2.0]
    np.testing.assert_allclose(table.H, [0.125, 0.5, 2.0], rtol=1e-8)
    assert table.interpolate(1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
def test_derivative_representation_through_inner_order(hypothesis_service, t):
    h = power(1.0)
    expected = t ** 1.5 / gamma(2.5)
    represented = hypothesis_service.fractional_derivative(h, 1.5, 0.5, t)
    differenced = hypothesis_service.derivative_of_H(h, 1.5, t)
    np.testing.assert_allclose(represented, expected, rtol=1e-4)
    np.testing.assert_allclose(represented, differenced, rtol=1e-4)


def test_cauchy_verdicts():
    assert cauchy_verdict([0.0, 0.0])[0] == CauchyVerdict.HOLDS
    assert cauchy_verdict([1.0, 1.5, 1.75, 1.8, 1.81])[0] == CauchyVerdict.HOLDS
    assert cauchy_verdict([1.0, 2.0, 3.0, 4.0])[0] == CauchyVerdict.FAILS
    assert cauchy_verdict([1.0, 1.0, float("inf")])[0] == CauchyVerdict.FAILS


def test_theorem1_zero_h_holds(hypothesis_service):
    report = hypothesis_service.check_theorem1_for_h(lambda u: 0.0, 0.5)
    assert report.theorem == Theorem.T1
    assert report.H_beta_at_0plus.holds
    assert report.variation_verdict == CauchyVerdict.HOLDS
    assert report.hypotheses_hold


def test_theorem1_discriminates_smooth_from_jump(hypothesis_service):
    smooth = trig_polynomial([0.2, 1.0, 0.5], [0.0, 0.3, 0.0, 0.2])
    spec = DerivedSeriesSpec(x=0.4, r=1, alpha=1.5)
    good = hypothesis_service.check_theorem1(smooth, spec)
    assert good.hypotheses_hold
    values = [p.value for p in good.variation_integral_partials]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    jump = DerivedSeriesSpec(x=0.0, r=2, alpha=2.5, theta=[0.0, 0.0])
    bad = hypothesis_service.check_theorem1(make_function("square"), jump)
    assert not bad.hypotheses_hold
    assert bad.variation_verdict == CauchyVerdict.FAILS
    assert "NonIntegrable" in bad.failure


def test_theorem2_examples(hypothesis_service):
    report = hypothesis_service.check_theorem2_for_h(lambda u: 0.0, 0.0)
    assert report.variation_verdict == CauchyVerdict.HOLDS

    report = hypothesis_service.check_theorem2_for_h(power(1.0), 0.0)
    assert report.variation_verdict == CauchyVerdict.HOLDS
    for partial in report.variation_integral_partials:
        assert partial.value == pytest.approx(math.pi - partial.eps, rel=1e-3)


def test_theorem2_slow_divergence_is_inconclusive(hypothesis_service):
    report = hypothesis_service.check_theorem2_for_h(lambda u: 1.0 / math.log(2 * math.pi / u), 0.0)
    assert report.variation_verdict == CauchyVerdict.INCONCLUSIVE
    assert report.relative_increment < 0.05


def test_theorem2_constant_h_fails(hypothesis_service):
    report = hypothesis_service.check_theorem2_for_h(lambda u: 1.0, 0.0)
    assert report.variation_verdict == CauchyVerdict.FAILS


def test_theorem2_smooth_function(hypothesis_service):
    smooth = trig_polynomial([0.0, 1.0], [0.0, 0.0, 0.5])
    report = hypothesis_service.check_theorem2(smooth, DerivedSeriesSpec(x=0.2, r=1, alpha=2.5))
    assert report.order == pytest.approx(0.5)
    assert report.variation_verdict == CauchyVerdict.HOLDS


def test_theorem2_requires_nonnegative_rho(hypothesis_service):
    with pytest.raises(ParameterOutOfRange):
        hypothesis_service.check_theorem2(make_function("cos"), DerivedSeriesSpec(r=1, alpha=1.5))


def test_cesaro_orders(hypothesis_service):
    spec = DerivedSeriesSpec(r=1, alpha=2.5)
    assert hypothesis_service.cesaro_order(spec, 0.4, Theorem.T1) == pytest.approx(2.9)
    assert hypothesis_service.cesaro_order(spec, 0.4, Theorem.T2) == pytest.approx(2.9)


def test_default_eps_list():
    eps = default_eps_list()
    assert len(eps) == 14
    assert eps[0] == pytest.approx(math.pi / 2)
