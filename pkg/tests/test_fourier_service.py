import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nqlab.core.errors import IndexOutOfRange, ParameterOutOfRange, SingularAtZero
from nqlab.models.periodic import make_function, sawtooth_partial, trig_polynomial
from nqlab.schemas.fourier import DerivedSeriesSpec
from nqlab.services.fourier_service import FourierService


@pytest.fixture
def sawtooth_model(fourier_service):
    return fourier_service.fourier_coefficients(make_function("sawtooth"), 8, quad_nodes=16384)


def test_periodic_functions_repeat():
    t = np.linspace(-7.0, 7.0, 57) + 0.013
    for name in ("sin", "cos", "sawtooth", "square", "abs"):
        f = make_function(name)
        np.testing.assert_allclose(f.eval(t + 2 * math.pi), f.eval(t), atol=1e-12)


def test_unknown_function_name():
    with pytest.raises(ParameterOutOfRange, match="unknown function 'wobble'"):
        make_function("wobble")


def test_plugin_function_resolves():
    f = make_function("math:sin")
    assert f.eval(0.5) == pytest.approx(math.sin(0.5))
    assert f.derivative(1, 0.5) == pytest.approx(math.cos(0.5), rel=1e-8)


def test_sine_coefficients(fourier_service):
    m = fourier_service.fourier_coefficients(make_function("sin"), 4)
    expected_b = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(m.b, expected_b, atol=1e-10)
    np.testing.assert_allclose(m.a, 0.0, atol=1e-10)


def test_cosine_two_coefficients(fourier_service):
    f = trig_polynomial([0.0, 0.0, 1.0], [0.0])
    m = fourier_service.fourier_coefficients(f, 4)
    np.testing.assert_allclose(m.a, [0.0, 0.0, 1.0, 0.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(m.b, 0.0, atol=1e-10)


def test_sawtooth_coefficients(sawtooth_model):
    n = np.arange(1, 9)
    np.testing.assert_allclose(sawtooth_model.b[1:], 2 * (-1.0) ** (n + 1) / n, atol=1e-6)
    np.testing.assert_allclose(sawtooth_model.a, 0.0, atol=1e-12)


def test_smooth_coefficients_decay(fourier_service):
    m = fourier_service.fourier_coefficients(make_function("abs"), 64)
    n = np.arange(1, 65)
    magnitude = np.abs(m.a[1:]) + np.abs(m.b[1:])
    assert np.all(magnitude <= 2.0 / n ** 2)


def test_coefficients_need_enough_nodes(fourier_service):
    with pytest.raises(ParameterOutOfRange):
        fourier_service.fourier_coefficients(make_function("sin"), 8, quad_nodes=16)
    with pytest.raises(ParameterOutOfRange):
        fourier_service.fourier_coefficients(make_function("sin"), 0)


def test_conjugate_term_examples(fourier_service, sawtooth_model):
    sin_model = fourier_service.fourier_coefficients(make_function("sin"), 4)
    cos_model = fourier_service.fourier_coefficients(make_function("cos"), 4)
    assert fourier_service.conjugate_term(sin_model, 1, 0.0) == pytest.approx(1.0)
    assert fourier_service.conjugate_term(cos_model, 1, math.pi / 2) == pytest.approx(-1.0)
    assert fourier_service.conjugate_term(sawtooth_model, 3, 1.0) == pytest.approx(2 / 3 * math.cos(3), abs=1e-6)


def test_conjugate_term_index_range(fourier_service, sawtooth_model):
    with pytest.raises(IndexOutOfRange):
        fourier_service.conjugate_term(sawtooth_model, 0, 0.0)
    with pytest.raises(IndexOutOfRange):
        fourier_service.derived_conjugate_term(sawtooth_model, 9, 0.0, 1)


def test_derived_term_identities(fourier_service, sawtooth_model):
    sin_model = fourier_service.fourier_coefficients(make_function("sin"), 4)
    assert fourier_service.derived_conjugate_term(sin_model, 1, 0.0, 1) == pytest.approx(0.0, abs=1e-12)
    for n in range(1, 9):
        for x in (0.3, 1.7):
            base = fourier_service.conjugate_term(sawtooth_model, n, x)
            assert fourier_service.derived_conjugate_term(sawtooth_model, n, x, 0) == pytest.approx(base)
            assert fourier_service.derived_conjugate_term(sawtooth_model, n, x, 2) == pytest.approx(
                -n * n * base, abs=1e-10
            )


@pytest.mark.parametrize("r", [1, 2, 3])
def test_derived_term_matches_finite_differences(fourier_service, sawtooth_model, r):
    h = 1e-3 if r == 3 else 1e-4
    x = 0.9
    for n in (1, 2, 3):
        nodes = x + (r / 2 - np.arange(r + 1)) * h
        weights = [(-1) ** i * math.comb(r, i) for i in range(r + 1)]
        estimate = sum(
            w * fourier_service.conjugate_term(sawtooth_model, n, t) for w, t in zip(weights, nodes)
        ) / h ** r
        exact = fourier_service.derived_conjugate_term(sawtooth_model, n, x, r)
        assert estimate == pytest.approx(exact, rel=1e-4, abs=1e-6)


def test_p_polynomial_examples(fourier_service):
    assert fourier_service.p_polynomial(DerivedSeriesSpec(r=2, alpha=3.0, theta=[0.0, 0.0]), 1.2) == 0.0
    assert fourier_service.p_polynomial(DerivedSeriesSpec(r=2, alpha=3.0, theta=[1.0, 2.0]), 3.0) == pytest.approx(7.0)
    assert fourier_service.p_polynomial(DerivedSeriesSpec(r=3, alpha=3.5, theta=[1.0, 0.0, 4.0]), 2.0) == pytest.approx(9.0)
    with pytest.raises(ParameterOutOfRange):
        fourier_service.p_polynomial(DerivedSeriesSpec(r=1, alpha=2.0, theta=[1.0]), 4.0)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=4),
    st.floats(min_value=-math.pi, max_value=math.pi),
)
def test_p_polynomial_is_taylor_sum(theta, u):
    spec = DerivedSeriesSpec(r=len(theta), alpha=len(theta) + 0.5, theta=theta)
    expected = sum(c * u ** i / math.factorial(i) for i, c in enumerate(theta))
    assert FourierService().p_polynomial(spec, u) == pytest.approx(expected, abs=1e-9)


def test_h_function_examples(fourier_service):
    spec = DerivedSeriesSpec(x=0.0, r=1, alpha=2.0, theta=[0.0])
    assert fourier_service.h_function(make_function("sin"), spec, 0.7) == pytest.approx(0.0, abs=1e-15)
    assert fourier_service.h_function(make_function("cos"), spec, 0.5) == pytest.approx(1.75517, rel=1e-5)


def test_h_vanishes_for_polynomial_extension(fourier_service):
    constant = trig_polynomial([4.0], [0.0])
    spec = DerivedSeriesSpec(x=1.0, r=1, alpha=1.5, theta=[2.0])
    for u in (0.1, 1.0, 3.0):
        assert fourier_service.h_function(constant, spec, u) == pytest.approx(0.0, abs=1e-15)


def test_h_function_rejects_tiny_u(fourier_service):
    spec = DerivedSeriesSpec(r=1, alpha=2.0, theta=[0.0])
    with pytest.raises(SingularAtZero):
        fourier_service.h_function(make_function("cos"), spec, 1e-12)


def test_default_theta_makes_h_vanish_at_zero(fourier_service):
    f = trig_polynomial([0.2, 1.0, 0.5], [0.0, 0.3, 0.0, 0.2])
    for r in (1, 2, 3):
        spec = DerivedSeriesSpec(x=0.4, r=r, alpha=r + 0.5)
        assert abs(fourier_service.h_function(f, spec, 1e-3)) < 1e-2
        assert fourier_service.resolve_spec(f, spec).theta[0] == pytest.approx(f.eval(0.4))


def test_beta_vanishes_for_zero_theta_and_first_order(fourier_service):
    assert fourier_service.beta_closed_form([0.0, 0.0, 0.0, 0.0], 4, 7) == 0.0
    assert fourier_service.beta_closed_form([3.0], 1, 5) == 0.0


def test_beta_even_example(fourier_service):
    f = make_function("cos")
    spec = DerivedSeriesSpec(x=0.0, r=2, alpha=3.0, theta=[0.0, 1.0])
    for n in range(1, 6):
        _, beta_n = fourier_service.alpha_beta_split(f, spec, n)
        assert beta_n == pytest.approx(2 * (-1) ** n * n)


@pytest.mark.parametrize("r", [3, 4, 5])
def test_beta_closed_form_matches_quadrature(fourier_service, r):
    f = make_function("cos")
    theta = [0.7, -1.3, 0.4, 2.1, -0.6][:r]
    spec = DerivedSeriesSpec(x=0.3, r=r, alpha=r + 0.5, theta=theta)
    for n in (1, 2, 5):
        _, closed = fourier_service.alpha_beta_split(f, spec, n)
        _, numeric = fourier_service.alpha_beta_split(f, spec, n, beta_method="quadrature")
        assert closed == pytest.approx(numeric, rel=1e-8, abs=1e-8)


@pytest.mark.parametrize("name", ["cos", "sawtooth_partial"])
@pytest.mark.parametrize("r", [1, 2])
def test_split_consistency(fourier_service, name, r):
    f = make_function("cos") if name == "cos" else sawtooth_partial(16)
    model = fourier_service.fourier_coefficients(f, 32, quad_nodes=4096)
    spec = DerivedSeriesSpec(x=0.7, r=r, alpha=r + 1.5)
    rows = fourier_service.split_table(f, spec, 20, model=model)
    for row in rows:
        assert row.deviation <= 1e-6 * (1 + row.n ** r)


def test_split_handles_jumps(fourier_service):
    f = make_function("sawtooth")
    model = fourier_service.fourier_coefficients(f, 8, quad_nodes=2 ** 18)
    spec = DerivedSeriesSpec(x=1.0, r=1, alpha=2.5)
    for n in (1, 4, 8):
        alpha_n, beta_n = fourier_service.alpha_beta_split(f, spec, n)
        derived = fourier_service.derived_conjugate_term(model, n, 1.0, 1)
        assert alpha_n + beta_n == pytest.approx(derived, abs=1e-6)


def test_derived_series_sources(fourier_service):
    spec = DerivedSeriesSpec(x=0.0, r=1, alpha=2.0)
    s = fourier_service.derived_conjugate_series_source(make_function("sin"), spec, N=16)
    np.testing.assert_allclose(s.terms(20), 0.0, atol=1e-12)

    s = fourier_service.derived_conjugate_series_source(make_function("cos"), spec, N=16)
    terms = s.terms(20)
    assert terms[0] == 0.0
    assert terms[1] == pytest.approx(-1.0)
    np.testing.assert_allclose(terms[2:], 0.0, atol=1e-12)

    f = trig_polynomial([0.0, 1.0, 0.0, 2.0], [0.0, 0.5, -1.0])
    s = fourier_service.derived_conjugate_series_source(f, DerivedSeriesSpec(x=0.4, r=1, alpha=1.5), N=16)
    np.testing.assert_allclose(s.terms(16)[4:], 0.0, atol=1e-11)
    assert s.max_n_hint == 16


def test_derived_series_spec_validation():
    with pytest.raises(ValueError, match="requires r < alpha"):
        DerivedSeriesSpec(r=3, alpha=2.0)
    with pytest.raises(ValueError, match="theta must have length"):
        DerivedSeriesSpec(r=2, alpha=3.0, theta=[1.0])
