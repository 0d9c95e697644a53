import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from biasmarket import analytic as A
from biasmarket.params import Params

# frozen values computed independently from the closed forms


def test_adaptive_examples():
    assert A.adaptive_beta0(0.9, 0.5) == pytest.approx(0.4)
    p1, bound = A.adaptive_prediction(0.9, 0.005, 0.5)
    assert p1 == pytest.approx(0.898) and bound == pytest.approx(0.0025)
    assert A.adaptive_convergence_time(1000, 0.5) == pytest.approx(9.965784, abs=1e-6)
    assert A.adaptive_convergence_time(1000, 0.9) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("call", [
    lambda: A.adaptive_beta0(0.5, 0.3),
    lambda: A.adaptive_beta0(0.9, 1.2),
    lambda: A.adaptive_convergence_time(100, 1.0),
    lambda: A.adaptive_convergence_time(100, 0.0),
    lambda: A.dispersion_prediction(-1, 0.5),
    lambda: A.stop_time(0.0, 1.0),
    lambda: A.map_y(0.1, 0.1),
])  # fmt: skip
def test_domain_errors(call):
    with pytest.raises(ValueError), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        call()


def test_map_f_examples():
    assert A.map_f(0.9) == pytest.approx(0.58)
    assert A.map_f(0.2) == pytest.approx(0.38)
    assert A.map_f(0.5) == 0.5
    assert A.iterate_f(0.9, 2) == pytest.approx([0.9, 0.58, 0.5672])


@given(st.floats(0, 1))
def test_map_f_moves_toward_half_without_crossing(p):
    q = A.map_f(p)
    assert abs(q - 0.5) <= abs(p - 0.5)
    assert (q - 0.5) * (p - 0.5) >= 0


def test_g_fixed_points_and_stability():
    lo, zero, hi = A.g_fixed_points()
    assert hi == pytest.approx(0.1464466, abs=1e-7) and lo == -hi and zero == 0.0
    for x in (lo, zero, hi):
        assert A.map_g(x) == pytest.approx(x, abs=1e-15)
    assert A.map_g_derivative(0.0) == pytest.approx(math.sqrt(2))
    assert A.map_g_derivative(hi) == pytest.approx(2 - math.sqrt(2))
    assert abs(A.map_g_derivative(hi)) < 1 < abs(A.map_g_derivative(0.0))


@given(st.floats(-0.3, 0.3))
def test_map_g_derivative_matches_finite_difference(x):
    h = 1e-7
    if abs(x) < 2 * h:
        return
    fd = (A.map_g(x + h) - A.map_g(x - h)) / (2 * h)
    assert fd == pytest.approx(A.map_g_derivative(x), abs=1e-6)


@given(st.floats(0.3, 0.7), st.integers(0, 10))
def test_weak_bias_price_step_is_g_in_scaled_coordinates(p, t):
    x = A.scaled_from_price(p, t)
    via_map = A.price_from_scaled(A.map_g(x), t + 1)
    assert A.price_step_weak_bias(p, t) == pytest.approx(via_map, abs=1e-13)


@given(st.floats(0.3, 0.7), st.integers(0, 10), st.sampled_from([0.3, 0.5, 0.8]))
def test_weak_bias_price_step_is_y_in_scaled_coordinates(p, t, gamma):
    q = A.q_gamma(gamma)
    x = A.scaled_from_price(p, t, q)
    via_map = A.price_from_scaled(A.map_y(x, gamma), t + 1, q)
    assert A.price_step_weak_bias(p, t, q) == pytest.approx(via_map, abs=1e-13)


def test_q_gamma_examples():
    assert A.q_gamma(1.0) == pytest.approx(0.48)
    assert A.q_gamma(0.5) == pytest.approx(0.175)
    assert A.Q_FIT.envelope(0.5) == pytest.approx((0.155, 0.195))
    with pytest.warns(RuntimeWarning):
        A.q_gamma(0.2)


def test_dispersion_and_stop_time():
    assert A.dispersion_prediction(0, 0.5) == 1.0
    assert A.dispersion_prediction(10, 1.0) == pytest.approx(2**-5)
    assert A.stop_time(0.005, 1.0) == pytest.approx(13.287712, abs=1e-6)
    assert A.stop_time(0.005, 0.5) == pytest.approx(37.964892, abs=1e-6)


@given(st.floats(0.001, 0.2))
def test_stop_time_width_equals_no_trade_band(c):
    assert A.dispersion_prediction(A.stop_time(c, 1.0), 1.0) == pytest.approx(2 * c, rel=1e-12)
    assert A.dispersion_prediction(A.stop_time(c, 0.7), 0.7) == pytest.approx(2 * c, rel=1e-12)


def test_y_map_reduces_to_g_at_half_exponent():
    # with exponent 1/2 the y-map coincides with g
    fit = A.QGammaFit(a=0.5, b=0.0)
    q = fit(1.0)
    for y in (-0.2, 0.05, 0.13):
        assert 2.0**q * y - 2.0 ** (q + 1.0) * abs(y) * y == pytest.approx(A.map_g(y), abs=1e-15)


def test_y_fixed_points():
    lo, zero, hi = A.y_fixed_points(0.8)
    assert hi == pytest.approx(0.1098773, abs=1e-6)
    for y in (lo, zero, hi):
        assert A.map_y(y, 0.8) == pytest.approx(y, abs=1e-15)


def test_price_deviation_decays_like_one_over_t():
    # iterate the full-revision price map; the rescaled deviation settles at the g fixed point
    p, path = 0.6, []
    for t in range(40):
        p = A.price_step_weak_bias(p, t)
        path.append(abs(A.scaled_from_price(p, t + 1)))
    assert path[-1] == pytest.approx(A.g_fixed_points()[2], abs=1e-9)


def test_predictions_for_defaults():
    out = A.predictions(Params())
    assert out["adaptive_beta0"] == pytest.approx(0.4)
    assert out["stop_time"] == pytest.approx(37.964892, abs=1e-6)
    out = A.predictions(Params(gamma=0.2, p0=0.3))
    assert out["adaptive_beta0"] is None and out["stop_time"] is None and out["y_fixed_point"] is None
