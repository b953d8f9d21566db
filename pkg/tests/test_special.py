import math

import mpmath as mp
import numpy as np
import pytest
from scipy.special import i0e, i1e

from randzeta import special

mp.mp.dps = 40


def mp_log_i0(y):
    return float(mp.log(mp.besseli(0, y)))


@pytest.mark.parametrize("y", [1e-6, 0.3, 1.0, 5.0, 14.99, 15.0, 15.01, 40.0, 300.0, 5000.0])
def test_log_i0_relative(y):
    ref = mp_log_i0(y)
    assert special.log_i0(y) == pytest.approx(ref, rel=1e-12)


def test_log_i0_value_at_one():
    assert special.log_i0(1.0) == pytest.approx(math.log(1.2660658777520082), abs=1e-14)
    assert special.log_i0(1.0) == pytest.approx(0.2359144, abs=1e-7)


def test_log_i0_vs_scipy_scaled():
    y = np.linspace(0.01, 60, 500)
    # log(i0e) + y cancels at small y, so the scipy oracle needs an absolute floor
    assert np.allclose(special.log_i0(y), np.log(i0e(y)) + y, rtol=1e-12, atol=1e-13)


def test_ratio():
    y = np.concatenate([np.linspace(0, 60, 301), [1e3, 1e4]])
    ref = np.where(y > 0, i1e(y) / np.where(y > 0, i0e(y), 1.0), 0.0)
    assert np.allclose(special.i1_over_i0(y), ref, rtol=1e-13, atol=1e-300)


def test_ratio_derivative_finite_difference():
    for y in (0.0005, 0.5, 3.0, 20.0):
        e = 1e-6
        fd = (special.i1_over_i0(y + e) - special.i1_over_i0(y - e)) / (2 * e)
        assert special.i1_over_i0_prime(y) == pytest.approx(fd, abs=1e-8)


def test_f_basics():
    assert special.f(0.0) == 0.0
    assert special.f_prime(0.0) == 0.5
    assert special.f_second(0.0) == -0.125
    x = 0.01
    assert abs(special.f(x) - 0.0049938) <= 1e-6
    assert abs(special.f(x) - (x / 2 - x * x / 16)) <= x**3


@pytest.mark.parametrize("x", [0.1, 0.49, 0.5, 0.51, 2.0, 30.0, 200.0])
def test_f_derivatives(x):
    ref = mp.mpf(x)
    g = lambda t: mp.log(mp.besseli(0, mp.sqrt(2 * t)))
    assert special.f(x) == pytest.approx(float(g(ref)), rel=1e-13)
    assert special.f_prime(x) == pytest.approx(float(mp.diff(g, ref)), rel=1e-12)
    assert special.f_second(x) == pytest.approx(float(mp.diff(g, ref, 2)), rel=1e-10, abs=1e-15)


def test_domain_error():
    for fn in (special.log_i0, special.f, special.f_prime, special.i1_over_i0):
        with pytest.raises(ValueError):
            fn(-1.0)


def test_vectorized_shapes():
    x = np.array([[0.1, 0.2], [3.0, 40.0]])
    assert special.f(x).shape == (2, 2)
    assert isinstance(special.f(0.3), float)
