"""Closed forms and quadratures: scale variances and covariances, Bessel CGFs,
tilted moments, the m_n / r / Delta bookkeeping and the tail bounds.

Every per-scale quantity has two backends. ``"exact"`` sums over the primes of
the scale (needs ``2**k <= 20``, i.e. k <= 4). ``"integral"`` replaces the
prime sum by the prime number theorem density ``du / log u`` and works at any k.
The unspecified absolute constants of the bounds are plain keyword
arguments defaulting to 1; :func:`calibrate_constant` fits them to data.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import sici

from . import special
from .primes import CapacityError, PrimeTable, table_for_depth

LOG2 = math.log(2.0)
SIGMA_SQ = LOG2 / 2.0
LAMBDA_MAX = 10.0
EXACT_MAX_SCALE = 4

bessel_log_i0 = special.log_i0
f = special.f
f_prime = special.f_prime
f_second = special.f_second


class RegimeWarning(UserWarning):
    """Arguments fall outside the range where a bound is claimed to hold."""


def _check_backend(backend: str, allowed=("exact", "integral")) -> None:
    if backend not in allowed:
        raise ValueError(f"backend must be one of {allowed}, got {backend!r}")


def _scale_data(k: int, table: PrimeTable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(p as float, log p) for the primes of scale k."""
    if k < 0:
        raise ValueError(f"scale k={k} must be >= 0")
    if table is None:
        if k > EXACT_MAX_SCALE:
            raise CapacityError(
                f"exact backend needs primes up to exp(2**{k}); enumeration stops at "
                f"scale {EXACT_MAX_SCALE}, use backend='integral'"
            )
        table = table_for_depth(k)
    s = table.scale_slice(k)
    return table.primes[s].astype(np.float64), table.log_p[s]


def _range_data(k_lo: int, k_hi: int, table: PrimeTable | None = None):
    if table is None:
        if k_hi > EXACT_MAX_SCALE:
            raise CapacityError(f"scale k={k_hi} beyond exact capacity {EXACT_MAX_SCALE}")
        table = table_for_depth(max(k_hi, 0))
    s = table.scales_slice(k_lo, k_hi)
    return table.primes[s].astype(np.float64), table.log_p[s]


def _check_lambda(lam: float, lam_max: float, name: str = "lambda") -> None:
    if lam < 0:
        raise ValueError(f"{name}={lam} must be >= 0")
    if lam > lam_max:
        raise ValueError(f"{name}={lam} exceeds the configured bound C={lam_max}")


# ---------------------------------------------------------------------------
# variances and covariances


def sigma_sq() -> float:
    """Limiting per-scale variance (log 2) / 2."""
    return SIGMA_SQ


def variance_scale(k: int, backend: str = "exact", table: PrimeTable | None = None) -> float:
    """sigma_k^2 = sum over scale k of 1/(2p)."""
    _check_backend(backend)
    if backend == "integral":
        if k < 0:
            raise ValueError(f"scale k={k} must be >= 0")
        # 1/2 * int dv / v over (2^{k-1}, 2^k] is (log 2)/2 for every k
        return SIGMA_SQ
    p, _ = _scale_data(k, table)
    return math.fsum(0.5 / p)


def _covariance_integral(k: int, dh: float) -> float:
    if dh == 0.0:
        return SIGMA_SQ
    # 1/2 int cos(dh v) / v dv over (2^{k-1}, 2^k] is a difference of cosine integrals
    _, ci_hi = sici(dh * 2.0**k)
    _, ci_lo = sici(dh * 2.0 ** (k - 1))
    return 0.5 * float(ci_hi - ci_lo)


def covariance_scale(
    k: int, dh: float, backend: str = "exact", table: PrimeTable | None = None
) -> float:
    """rho_k(dh) = sum over scale k of cos(dh log p) / (2p)."""
    _check_backend(backend)
    if dh < 0:
        raise ValueError(f"dh={dh} must be >= 0")
    if backend == "integral":
        if k < 0:
            raise ValueError(f"scale k={k} must be >= 0")
        return _covariance_integral(k, dh)
    p, logp = _scale_data(k, table)
    return math.fsum(np.cos(dh * logp) * 0.5 / p)


@dataclass(frozen=True)
class ScaleStatistics:
    """Variance and covariance function of one scale under a chosen backend."""

    k: int
    backend: str = "exact"

    def __post_init__(self):
        _check_backend(self.backend)

    @property
    def sigma_sq_k(self) -> float:
        return variance_scale(self.k, self.backend)

    def rho_k(self, dh: float) -> float:
        return covariance_scale(self.k, abs(dh), self.backend)

    def covariance_matrix(self, dh: float) -> np.ndarray:
        s, r = self.sigma_sq_k, self.rho_k(dh)
        return np.array([[s, r], [r, s]])


class CovarianceTotal(NamedTuple):
    value: float
    log_predictor: float
    saturation_predictor: float | None


def covariance_total(dh: float, n: int, backend: str = "exact") -> CovarianceTotal:
    """Covariance of X_n(h), X_n(h + dh): sum of rho_k over k = 0..n.

    Also returns the predictor (1/2) log(1/dh) and, when dh < 2^-n, the
    saturation predictor n (log 2)/2.
    """
    if dh == 0:
        raise ValueError("dh = 0 is a variance; use variance_scale")
    if not 0 < dh <= 1:
        raise ValueError(f"dh={dh} must lie in (0, 1]")
    value = math.fsum(covariance_scale(k, dh, backend) for k in range(n + 1))
    sat = n * SIGMA_SQ if dh < 2.0**-n else None
    return CovarianceTotal(value, 0.5 * math.log(1.0 / dh), sat)


def branching_point(dh: float) -> float:
    """floor(log2(1/dh)); ``math.inf`` when dh = 0."""
    if dh < 0:
        raise ValueError(f"dh={dh} must be >= 0")
    if dh == 0:
        return math.inf
    if dh > 1:
        raise ValueError(f"dh={dh} must be <= 1")
    # log2 is exact on powers of two, so dyadic dh lands on the right integer
    return int(math.floor(-math.log2(dh)))


# ---------------------------------------------------------------------------
# cumulant generating functions


class CgfResult(NamedTuple):
    """Requested backend value plus both backends and their gap."""

    value: float
    exact: float
    quadratic: float

    @property
    def difference(self) -> float:
        return self.exact - self.quadratic


def _cgf_backend(backend: str, exact_fn, quad_fn, k: int) -> CgfResult:
    _check_backend(backend, ("exact", "quadratic"))
    quad = quad_fn()
    if k <= EXACT_MAX_SCALE:
        ex = exact_fn()
    elif backend == "exact":
        raise CapacityError(f"scale k={k} beyond exact capacity {EXACT_MAX_SCALE}")
    else:
        ex = math.nan
    return CgfResult(ex if backend == "exact" else quad, ex, quad)


def cgf_one(k: int, lam: float, backend: str = "exact", lam_max: float = LAMBDA_MAX) -> CgfResult:
    """psi_k(lam) = log E exp(lam Y_k) = sum over scale k of log I0(lam / sqrt p)."""
    _check_lambda(lam, lam_max)

    def exact():
        p, _ = _scale_data(k)
        return math.fsum(special.log_i0(lam / np.sqrt(p)))

    def quadratic():
        s = variance_scale(k, "exact" if k <= EXACT_MAX_SCALE else "integral")
        return 0.5 * lam * lam * s

    return _cgf_backend(backend, exact, quadratic, k)


def _two_point_q(p, logp, lams, dh):
    l1, l2 = lams
    c = np.cos(dh * logp)
    return (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c) / (2.0 * p)


def _sigma_matrix(k: int, dh: float) -> np.ndarray:
    backend = "exact" if k <= EXACT_MAX_SCALE else "integral"
    s, r = variance_scale(k, backend), covariance_scale(k, dh, backend)
    return np.array([[s, r], [r, s]])


def cgf_two(
    k: int, lams: Sequence[float], dh: float, backend: str = "exact", lam_max: float = LAMBDA_MAX
) -> CgfResult:
    """Joint CGF of (Y_k(h), Y_k(h + dh)): sum of f(lam . M_p lam).

    M_p = (1/2p) [[1, cos(dh log p)], [cos(dh log p), 1]].
    """
    l1, l2 = (float(x) for x in lams)
    _check_lambda(l1, lam_max, "lambda1")
    _check_lambda(l2, lam_max, "lambda2")
    dh = abs(dh)
    lv = np.array([l1, l2])

    def exact():
        p, logp = _scale_data(k)
        return math.fsum(special.f(_two_point_q(p, logp, (l1, l2), dh)))

    def quadratic():
        return 0.5 * float(lv @ _sigma_matrix(k, dh) @ lv)

    return _cgf_backend(backend, exact, quadratic, k)


def cgf_pair_diff(
    k_lo: int,
    k_hi: int,
    lam1: float,
    lam2: float,
    h1: float,
    h2: float,
    table: PrimeTable | None = None,
) -> float:
    """log E exp(lam1 X(0) + lam2 (X(h2) - X(h1))) for X summed over scales k_lo+1..k_hi.

    The combination rotates into a single cosine per prime with amplitude
    |lam1 + lam2 (e^{-i h2 log p} - e^{-i h1 log p})| / sqrt(p).
    """
    if lam1 < 0 or lam2 < 0:
        raise ValueError("lam1 and lam2 must be >= 0")
    p, logp = _range_data(k_lo, k_hi, table)
    re = lam1 + (np.cos(h2 * logp) - np.cos(h1 * logp)) * lam2
    im = (np.sin(h2 * logp) - np.sin(h1 * logp)) * lam2
    return math.fsum(special.log_i0(np.hypot(re, im) / np.sqrt(p)))


# ---------------------------------------------------------------------------
# tilted moments


def tilted_moments_one(k: int, lam: float, lam_max: float = LAMBDA_MAX) -> tuple[float, float]:
    """(psi_k'(lam), psi_k''(lam)): mean and variance of Y_k under the tilt."""
    _check_lambda(lam, lam_max)
    p, _ = _scale_data(k)
    s = 1.0 / np.sqrt(p)
    mean = math.fsum(s * special.i1_over_i0(lam * s))
    var = math.fsum(special.i1_over_i0_prime(lam * s) / p)
    return mean, var


def tilted_moments_two(
    k: int, lams: Sequence[float], dh: float, lam_max: float = LAMBDA_MAX
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of lam -> sum_p f(lam . M_p lam).

    With q = lam . M lam: grad = 2 f'(q) M lam and
    Hess = 2 f'(q) M + 4 f''(q) (M lam)(M lam)^T, summed over the scale.
    """
    l1, l2 = (float(x) for x in lams)
    _check_lambda(l1, lam_max, "lambda1")
    _check_lambda(l2, lam_max, "lambda2")
    p, logp = _scale_data(k)
    c = np.cos(abs(dh) * logp)
    inv = 1.0 / (2.0 * p)
    # M lam, per prime
    m1 = inv * (l1 + c * l2)
    m2 = inv * (c * l1 + l2)
    q = l1 * m1 + l2 * m2
    fp, fs = special.f_prime(q), special.f_second(q)
    mean = np.array([math.fsum(2 * fp * m1), math.fsum(2 * fp * m2)])
    h11 = math.fsum(2 * fp * inv + 4 * fs * m1 * m1)
    h22 = math.fsum(2 * fp * inv + 4 * fs * m2 * m2)
    h12 = math.fsum(2 * fp * inv * c + 4 * fs * m1 * m2)
    return mean, np.array([[h11, h12], [h12, h22]])


# ---------------------------------------------------------------------------
# scaling constants


def r_of_n(n: int) -> int:
    """r = floor((log log n)^2); needs n >= 16 so that r >= 1."""
    if n < 16:
        raise ValueError(f"n={n} too small: r = floor((log log n)^2) needs n >= 16")
    return int(math.floor(math.log(math.log(n)) ** 2))


def m_n(n: float, eps: float = 0.0) -> float:
    """n log 2 - (3/4) log n + eps log n."""
    if n <= 0:
        raise ValueError(f"n={n} must be positive")
    return n * LOG2 - 0.75 * math.log(n) + eps * math.log(n)


@dataclass(frozen=True)
class ScalingConstants:
    n: int
    eps: float
    r: int
    delta: float
    m_n: float
    mu: float
    mu_sq_over_2sigma_sq: float
    mu_sq_expansion: float

    @property
    def expansion_error(self) -> float:
        return self.mu_sq_over_2sigma_sq - self.mu_sq_expansion

    def barrier_plus(self, k: int) -> float:
        """Upper-bound barrier (k - r) mu(eps) + (log n)^2."""
        return (k - self.r) * self.mu + math.log(self.n) ** 2

    def barrier_minus(self, k: int) -> float:
        """Lower-bound ceiling (k - r) mu + 1 (use with eps < 0)."""
        return (k - self.r) * self.mu + 1.0


def scaling_constants(n: int, eps: float = 0.0, r: int | None = None) -> ScalingConstants:
    """m_n(eps), r, Delta = r/100, mu(eps) = m_{n-r}(eps)/(n-r) and mu^2/(2 sigma^2).

    ``r`` may be overridden for desk-scale experiments; the default needs n >= 16.
    """
    if r is None:
        r = r_of_n(n)
    if not 0 <= r < n:
        raise ValueError(f"need 0 <= r < n, got r={r}, n={n}")
    N = n - r
    mu = m_n(N, eps) / N
    exact = mu * mu / (2.0 * SIGMA_SQ)
    expansion = LOG2 - (1.5 - 2.0 * eps) * math.log(N) / N
    return ScalingConstants(n, eps, r, r / 100.0, m_n(n, eps), mu, exact, expansion)


# ---------------------------------------------------------------------------
# tail bounds


class ChernoffResult(NamedTuple):
    bound: float
    lam: float
    c: float
    in_regime: bool


def _flag(ok: bool, msg: str) -> bool:
    if not ok:
        warnings.warn(msg, RegimeWarning, stacklevel=3)
    return ok


def chernoff_tail_one(
    x: float, k: int, r: int, c: float = 1.0, regime_c: float = LAMBDA_MAX
) -> ChernoffResult:
    """c exp(-x^2 / (2 (k-r) sigma^2)) with optimizing lam = x / ((k-r) sigma^2)."""
    if k <= r:
        raise ValueError(f"need k > r, got k={k}, r={r}")
    v = (k - r) * SIGMA_SQ
    ok = _flag(0 < x <= regime_c * (k - r), f"x={x} outside (0, C(k-r)] with C={regime_c}")
    return ChernoffResult(c * math.exp(-x * x / (2.0 * v)), x / v, c, ok)


def oscillation_bound(
    x: float,
    a: float,
    k: int,
    r: int,
    c_exp: float = 1.0,
    c: float = 1.0,
    regime_c: float = LAMBDA_MAX,
) -> float:
    """c exp(-x^2 / (2 (k-r) sigma^2) - c_exp a^{3/2}).

    Bounds the chance that X_{r,k} rises by more than ``a`` within 2^{-k-1}
    of a point where it is at most ``x``.
    """
    if k <= r:
        raise ValueError(f"need k > r, got k={k}, r={r}")
    _flag(0 <= x <= regime_c * (k - r), f"x={x} outside [0, C(k-r)] with C={regime_c}")
    _flag(2 <= a <= 2.0 ** (2 * k) - x, f"a={a} outside [2, 2^(2k) - x]")
    return c * math.exp(-x * x / (2.0 * (k - r) * SIGMA_SQ) - c_exp * a**1.5)


def sup_interval_bound(
    x: float, k: int, r: int, c: float = 1.0, regime_c: float = LAMBDA_MAX
) -> float:
    """Tail of the max of X_{r,k} over an interval of length 2^{-k}: c exp(-x^2/(2(k-r)sigma^2))."""
    if k <= r:
        raise ValueError(f"need k > r, got k={k}, r={r}")
    _flag(0 <= x <= regime_c * (k - r), f"x={x} outside [0, C(k-r)] with C={regime_c}")
    return c * math.exp(-x * x / (2.0 * (k - r) * SIGMA_SQ))


def max_int_bound(n: int, delta: float, c: float = 1.0) -> float:
    """c 2^{-n delta}: tail of max over [0, 1] of X_n at level (1 + delta) n log 2."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    return c * 2.0 ** (-n * delta)


class Calibration(NamedTuple):
    c_star: float
    c_upper: float


def calibrate_constant(freq, shape, n_samples: int | None = None) -> Calibration:
    """Smallest c with freq <= c * shape at every point.

    ``c_star`` uses the point estimates. ``c_upper`` replaces each frequency by
    a one-sided upper confidence value (freq + 3 SE, or 3/N when nothing was
    observed), so it is the conservative constant.
    """
    freq = np.atleast_1d(np.asarray(freq, dtype=float))
    shape = np.atleast_1d(np.asarray(shape, dtype=float))
    if np.any(shape <= 0):
        raise ValueError("bound shapes must be positive")
    c_star = float(np.max(freq / shape))
    if n_samples is None:
        return Calibration(c_star, c_star)
    se = np.sqrt(freq * (1 - freq) / n_samples)
    upper = np.where(freq > 0, freq + 3 * se, 3.0 / n_samples)
    return Calibration(c_star, float(np.max(upper / shape)))
