"""log I0, the ratio I1/I0, and f(x) = log I0(sqrt(2x)) with two derivatives.

All functions take scalars or arrays and return float64. Small arguments
use power series; large arguments use the log-scaled asymptotic series
(log I0) or a backward-evaluated continued fraction (I1/I0).
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

SERIES_SWITCH = 15.0
F_TAYLOR_SWITCH = 0.5

# I0(y) = sum_m (y^2/4)^m / (m!)^2 ; 70 terms reach 1e-17 relative at y = 15
_I0_TERMS = 70
_I0_COEF = np.array([1.0 / math.factorial(m) ** 2 for m in range(_I0_TERMS)])
# I1(y) / y = 1/2 sum_m (y^2/4)^m / (m! (m+1)!)
_I1_COEF = np.array([0.5 / (math.factorial(m) * math.factorial(m + 1)) for m in range(_I0_TERMS)])
# asymptotic: I0(y) ~ e^y / sqrt(2 pi y) * sum_k a_k / y^k, a_k = ((2k-1)!!)^2 / (k! 8^k)
_ASYM_TERMS = 30
_ASYM_COEF = np.ones(_ASYM_TERMS)
for _k in range(1, _ASYM_TERMS):
    _ASYM_COEF[_k] = _ASYM_COEF[_k - 1] * (2 * _k - 1) ** 2 / (8.0 * _k)


def _taylor_log_coefficients(order: int) -> list[Fraction]:
    # f(x) = log sum_m b_m x^m with b_m = 1 / (2^m (m!)^2)
    b = [Fraction(1, 2**m * math.factorial(m) ** 2) for m in range(order + 1)]
    # log of a power series with b_0 = 1: c_m = b_m - (1/m) sum_{j<m} j c_j b_{m-j}
    c = [Fraction(0)] * (order + 1)
    for m in range(1, order + 1):
        acc = sum(j * c[j] * b[m - j] for j in range(1, m))
        c[m] = b[m] - acc / m
    return c


# radius of convergence of f's Taylor series is j0,1^2 / 2 ~ 2.89
_F_ORDER = 40
_F_COEF = np.array([float(c) for c in _taylor_log_coefficients(_F_ORDER)])
_F1_COEF = np.array([m * _F_COEF[m] for m in range(1, _F_ORDER + 1)])
_F2_COEF = np.array([m * (m - 1) * _F_COEF[m] for m in range(2, _F_ORDER + 1)])


def _horner(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in coef[::-1]:
        out = out * x + c
    return out


def _check_domain(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError(f"{name}: argument must be >= 0")
    return arr


def _ret(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def log_i0(x):
    """Natural log of the modified Bessel function I0, relative error <= 1e-12."""
    y = _check_domain(x, "log_i0")
    out = np.empty_like(y)
    small = y < SERIES_SWITCH
    if np.any(small):
        q = y[small] ** 2 / 4.0
        out[small] = np.log1p(q * _horner(_I0_COEF[1:], q))
    if np.any(~small):
        yl = y[~small]
        s = _horner(_ASYM_COEF, 1.0 / yl)
        out[~small] = yl - 0.5 * np.log(2.0 * np.pi * yl) + np.log(s)
    return _ret(out, x)


def _ratio_cf(y: np.ndarray) -> np.ndarray:
    # I1/I0 = 1 / (2/y + 1 / (4/y + 1 / (6/y + ...))), evaluated from the tail
    depth = int(np.max(y)) + 60
    t = np.zeros_like(y)
    for j in range(depth, 0, -1):
        t = 1.0 / (2.0 * j / y + t)
    return t


def i1_over_i0(x):
    """R(x) = I1(x) / I0(x), the derivative of log I0."""
    y = _check_domain(x, "i1_over_i0")
    out = np.zeros_like(y)
    small = y < SERIES_SWITCH
    if np.any(small):
        ys = y[small]
        q = ys * ys / 4.0
        out[small] = ys * _horner(_I1_COEF, q) / _horner(_I0_COEF, q)
    if np.any(~small):
        out[~small] = _ratio_cf(y[~small])
    return _ret(out, x)


def i1_over_i0_prime(x):
    """Derivative of I1/I0: 1 - R/x - R^2 (limit 1/2 at 0)."""
    y = _check_domain(x, "i1_over_i0_prime")
    out = np.empty_like(y)
    tiny = y < 1e-3
    # R(y) = y/2 - y^3/16 + ..., so R' = 1/2 - 3 y^2 / 16 + O(y^4)
    out[tiny] = 0.5 - 3.0 * y[tiny] ** 2 / 16.0
    yb = y[~tiny]
    r = i1_over_i0(yb)
    out[~tiny] = 1.0 - r / yb - r * r
    return _ret(out, x)


def f(x):
    """f(x) = log I0(sqrt(2x)); f(x) = x/2 - x^2/16 + O(x^3)."""
    v = _check_domain(x, "f")
    out = np.empty_like(v)
    lo = v <= F_TAYLOR_SWITCH
    out[lo] = _horner(_F_COEF, v[lo])
    out[~lo] = log_i0(np.sqrt(2.0 * v[~lo]))
    return _ret(out, x)


def f_prime(x):
    """f'(x) = R(y) / y with y = sqrt(2x); f'(0) = 1/2."""
    v = _check_domain(x, "f_prime")
    out = np.empty_like(v)
    lo = v <= F_TAYLOR_SWITCH
    out[lo] = _horner(_F1_COEF, v[lo])
    y = np.sqrt(2.0 * v[~lo])
    out[~lo] = i1_over_i0(y) / y
    return _ret(out, x)


def f_second(x):
    """f''(x) = (1 - 2R/y - R^2) / y^2 with y = sqrt(2x); f''(0) = -1/8."""
    v = _check_domain(x, "f_second")
    out = np.empty_like(v)
    lo = v <= F_TAYLOR_SWITCH
    out[lo] = _horner(_F2_COEF, v[lo])
    y = np.sqrt(2.0 * v[~lo])
    r = i1_over_i0(y)
    out[~lo] = (1.0 - 2.0 * r / y - r * r) / (y * y)
    return _ret(out, x)
