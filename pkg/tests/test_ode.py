import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from charpde.ode import (
    BlowUpError,
    IntegrationError,
    OdeSystem,
    QuadratureError,
    StepSizeUnderflow,
    adaptive_simpson,
    integrate,
    quadrature,
    quadrature_with_error,
    rk4_fixed,
)


def test_exponential_growth_meets_tolerance():
    res = integrate(lambda t, y: (y[0],), [1.0], 0.0, 1.0, 1e-10)
    assert abs(res.y[0] - math.e) <= 1e-8
    assert res.t_samples[-1] == 1.0


def test_backward_direction():
    res = integrate(lambda t, y: (y[0],), [math.e], 1.0, 0.0, 1e-10)
    assert abs(res.y[0] - 1.0) <= 1e-9


def test_dense_samples_match_closed_form():
    ts = list(np.linspace(0.0, 2.0, 17))
    res = integrate(lambda t, y: (-2 * t * y[0],), [1.0], 0.0, 2.0, 1e-10, ts)
    assert res.t_samples == ts
    for t, y in zip(res.t_samples, res.y_samples):
        assert abs(y[0] - math.exp(-t * t)) <= 1e-9


def test_samples_include_start_and_end():
    res = integrate(lambda t, y: (1.0,), [0.0], 0.0, 1.0, 1e-8, [0.0, 0.5])
    assert res.t_samples == [0.0, 0.5, 1.0]
    assert res.y_samples[1][0] == pytest.approx(0.5, abs=1e-12)


def test_zero_span_returns_initial_state():
    res = integrate(lambda t, y: (1.0,), [3.0], 0.5, 0.5)
    assert res.y == [3.0]


def test_system_dimension_is_checked():
    with pytest.raises(ValueError):
        OdeSystem(0, lambda t, y: ())
    with pytest.raises(ValueError):
        OdeSystem(9, lambda t, y: ())


def test_harmonic_oscillator_system():
    sys = OdeSystem(2, lambda t, y: (y[1], -y[0]))
    res = integrate(sys, [0.0, 1.0], 0.0, 10.0, 1e-11)
    assert abs(res.y[0] - math.sin(10.0)) <= 1e-8
    assert abs(res.y[1] - math.cos(10.0)) <= 1e-8


def test_blow_up_detected_with_partial_result():
    with pytest.raises(BlowUpError) as info:
        integrate(lambda t, y: (y[0] ** 2,), [1.0], 0.0, 2.0, 1e-10, [0.5, 0.9, 1.5])
    exc = info.value
    assert 1.0 - 1e-6 < exc.t_last < 1.0
    assert exc.partial.t_samples == [0.5, 0.9]
    assert exc.partial.y_samples[1][0] == pytest.approx(10.0, rel=1e-8)


def test_domain_error_in_rhs_stops_with_underflow():
    with pytest.raises(StepSizeUnderflow) as info:
        integrate(lambda t, y: (math.sqrt(1.0 - t),), [0.0], 0.0, 2.0)
    assert isinstance(info.value.__cause__, ValueError)
    assert info.value.t_last == pytest.approx(1.0, abs=1e-6)


def test_step_callback_can_abort():
    class Stop(IntegrationError):
        pass

    def callback(t, y):
        if y[0] > 2.0:
            raise Stop("left window", t)

    with pytest.raises(Stop):
        integrate(lambda t, y: (1.0,), [0.0], 0.0, 5.0, step_callback=callback)


def test_max_steps():
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: (math.cos(200 * t),), [0.0], 0.0, 100.0, 1e-12, max_steps=50)


@given(
    lam=st.floats(-2.0, 2.0),
    y0=st.floats(-3.0, 3.0),
    span=st.floats(0.1, 2.0),
)
def test_time_reversal_round_trip(lam, y0, span):
    rhs = lambda t, y: (lam * y[0] + math.sin(3 * t),)  # noqa: E731
    forward = integrate(rhs, [y0], 0.0, span, 1e-11).y
    back = integrate(rhs, forward, span, 0.0, 1e-11).y
    assert abs(back[0] - y0) <= 1e-8 * (1 + abs(y0))


def test_tighter_tolerance_is_not_less_accurate():
    rhs = lambda t, y: (y[0] * math.cos(t) + t,)  # noqa: E731
    exact = rk4_fixed(rhs, [1.0], 0.0, 3.0, 20000)[0]
    errors = [abs(integrate(rhs, [1.0], 0.0, 3.0, tol).y[0] - exact) for tol in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert all(b <= a * 1.5 for a, b in zip(errors, errors[1:]))
    assert errors[-1] < errors[0] * 1e-3


def test_rk4_is_fourth_order():
    rhs = lambda t, y: (-y[0] + math.sin(t),)  # noqa: E731
    exact = 0.5 * (math.sin(1) - math.cos(1)) + 1.5 * math.exp(-1)
    errs = [abs(rk4_fixed(rhs, [1.0], 0.0, 1.0, n)[0] - exact) for n in (10, 20, 40, 80)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(3.8 <= p <= 4.2 for p in orders)


def test_adaptive_agrees_with_rk4_reference():
    rhs = lambda t, y: (t * t / 2 + y[0] ** 3 / 3 + 0.1,)  # noqa: E731
    reference = rk4_fixed(rhs, [0.2], 0.0, 1.0, 10000)[0]
    assert abs(integrate(rhs, [0.2], 0.0, 1.0, 1e-11).y[0] - reference) <= 1e-9


# -- quadrature ---------------------------------------------------------------

@pytest.mark.parametrize("k", range(0, 24))
def test_kronrod_rule_exact_on_polynomials(k):
    value = quadrature(lambda s: s ** k, 0.0, 1.0, 1e-14)
    assert value == pytest.approx(1.0 / (k + 1), rel=1e-14)


# (integrand, a, b, also checked by adaptive Simpson); Simpson's halving
# local tolerance cannot resolve the sqrt endpoint singularity
@pytest.mark.parametrize(
    "f, a, b, simpson",
    [
        (lambda s: math.exp(s + s * s / 2), 0.0, 1.0, True),
        (lambda s: math.exp(s * s / 2), 0.0, 1.0, True),
        (lambda s: 1.0 / (1e-3 + s * s), -1.0, 1.0, True),
        (lambda s: math.sqrt(s), 0.0, 1.0, False),
        (lambda s: math.sin(50 * s) ** 2, 0.0, 2.0, True),
    ],
)
def test_quadrature_matches_independent_rules(f, a, b, simpson):
    ours = quadrature(f, a, b, 1e-12)
    theirs, _ = sp_integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=500)
    assert abs(ours - theirs) <= 1e-10 * (1 + abs(theirs))
    if simpson:
        assert abs(adaptive_simpson(f, a, b, 1e-11) - ours) <= 1e-8 * (1 + abs(ours))


def test_reversed_limits_flip_sign():
    f = lambda s: math.cos(s) + s  # noqa: E731
    assert quadrature(f, 2.0, 0.5) == pytest.approx(-quadrature(f, 0.5, 2.0), rel=1e-15)


def test_relative_tolerance():
    value, err = quadrature_with_error(lambda s: math.exp(s), 0.0, 40.0, 1e-300, rtol=1e-13)
    assert value == pytest.approx(math.expm1(40.0), rel=1e-12)
    assert err <= 1e-13 * value


def test_quadrature_errors():
    with pytest.raises(QuadratureError):
        quadrature(lambda s: math.inf, 0.0, 1.0)
    with pytest.raises(QuadratureError):
        quadrature(lambda s: 1.0 / abs(s - 1 / 3), 0.0, 1.0, 1e-12, limit=30)
    with pytest.raises(ValueError):
        quadrature(lambda s: s, 0.0, 1.0, 0.0)
