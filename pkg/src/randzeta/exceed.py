"""Exceedance counts on simulated fields, moment estimates and diagnostics.

Counts are taken over a dyadic grid of [0, 1). A count may carry a barrier
(partial sums X_{r,k} must stay under per-scale ceilings) and a terminal
condition that is either "X_{r,n} >= m" or "X_{r,n} in a window". The
J+ / J- configurations are built from :func:`randzeta.analytic.scaling_constants`.

At desk-scale depths only exact pathwise inequalities, Monte Carlo
identities and trends are checked; nothing here tests asymptotic constants.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import stats

from . import analytic
from .analytic import LOG2, ScalingConstants, branching_point, m_n
from .model import dyadic_grid, eval_increments_grid, sample_phases
from .primes import CapacityError, table_for_depth
from .walks import BarrierSpec, BrwParams, brw_exceedances, brw_sweep, sample_brw_max

MIN_COMPARISON_SAMPLES = 10_000
# cap on angles held per replicate block (doubles)
BLOCK_CELLS = 1 << 23


def _block(chunk: int, n_primes: int) -> int:
    return max(1, min(chunk, BLOCK_CELLS // n_primes))


@dataclass(frozen=True)
class ExceedanceConfig:
    """Count grid points h in H_g with X_{r,n}(h) >= m (or in ``window``).

    ``r = -1`` means the full field X_n including scale 0. ``barrier``
    ceilings apply to X_{r,k} at scales barrier.start+1 .. n, where
    barrier.start must equal r.
    """

    m: float
    n: int
    g: int
    r: int = -1
    barrier: BarrierSpec | None = None
    window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.g < 1:
            raise ValueError("grid exponent g must be >= 1")
        if not -1 <= self.r < self.n:
            raise ValueError(f"need -1 <= r < n, got r={self.r}, n={self.n}")
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ValueError(f"window {self.window} must have positive width")
        if self.barrier is not None:
            if self.barrier.start != self.r:
                raise ValueError(f"barrier starts at scale {self.barrier.start}, config r={self.r}")
            if self.barrier.start + self.barrier.steps != self.n:
                raise ValueError("barrier must cover scales r+1..n")

    def without_barrier(self) -> "ExceedanceConfig":
        return ExceedanceConfig(self.m, self.n, self.g, self.r, None, self.window)


def z_tilde_config(m: float, n: int, g: int, B: float) -> ExceedanceConfig:
    """Z~(m): X_n >= m with X_k < k log 2 + B for every k = 0..n."""
    barrier = BarrierSpec.linear(-1, n, LOG2, B, (m, math.inf), origin=0)
    return ExceedanceConfig(m, n, g, -1, barrier)


def j_plus_config(sc: ScalingConstants, g: int, start_scale: int | None = None) -> ExceedanceConfig:
    """J+: X_{r,n} >= m_{n-r}(eps), X_{r,k} <= (k-r) mu(eps) + (log n)^2 from ``start_scale`` on.

    The default start floor(log n)^2 exceeds n at desk scale; pass a smaller
    one explicitly there.
    """
    n, r = sc.n, sc.r
    if start_scale is None:
        start_scale = math.floor(math.log(n)) ** 2
    level = m_n(n - r, sc.eps)
    barrier = BarrierSpec.linear(r, n, sc.mu, math.log(n) ** 2, (level, math.inf), first=start_scale)
    return ExceedanceConfig(level, n, g, r, barrier)


def j_minus_config(sc: ScalingConstants, g: int, delta: float) -> ExceedanceConfig:
    """J-: X_{r,n} in [m_{n-r}(eps), m_{n-r}(eps) + delta], X_{r,k} <= (k-r) mu(eps) + 1.

    Pass constants built with a negative eps (the paper's m_{n-r}(-eps)).
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    n, r = sc.n, sc.r
    level = m_n(n - r, sc.eps)
    window = (level, level + delta)
    return ExceedanceConfig(level, n, g, r, BarrierSpec.linear(r, n, sc.mu, 1.0, window), window)


# ---------------------------------------------------------------------------
# counting


def count_exceedances(values, m: float):
    """Number of values >= m along the last axis."""
    v = np.asarray(values)
    c = np.count_nonzero(v >= m, axis=-1)
    return int(c) if np.ndim(c) == 0 else c


def _indicators(increments: np.ndarray, config: ExceedanceConfig) -> np.ndarray:
    """Boolean (..., G) mask of grid points meeting the config's event."""
    inc = np.asarray(increments)
    K = inc.shape[-2] - 1
    if K < config.n:
        raise ValueError(f"increments cover scales 0..{K}, config needs up to {config.n}")
    partial = np.cumsum(inc[..., config.r + 1 : config.n + 1, :], axis=-2)  # X_{r,k}, k = r+1..n
    final = partial[..., -1, :]
    if config.window is not None:
        ok = (final >= config.window[0]) & (final <= config.window[1])
    else:
        ok = final >= config.m
    if config.barrier is not None:
        ceil = config.barrier.ceilings[:, None]
        ok &= np.all(partial <= ceil, axis=-2)
    return ok


def count_with_barrier(increments, config: ExceedanceConfig):
    """Count of grid points whose path respects the barrier and meets the terminal condition.

    ``increments`` holds Y_k(h) with shape (..., K+1, G) for scales 0..K.
    """
    c = np.count_nonzero(_indicators(increments, config), axis=-1)
    return int(c) if np.ndim(c) == 0 else c


def pz_bound(e1: float, e2: float) -> float:
    """Paley-Zygmund lower bound E[Z]^2 / E[Z^2], clipped to [0, 1]."""
    if e2 <= 0:
        raise ValueError("E[Z^2] must be > 0")
    return float(min(max(e1 * e1 / e2, 0.0), 1.0))


# ---------------------------------------------------------------------------
# simulation drivers


def field_increments(
    n: int, g: int, replicates: int, seed: int, chunk: int = 256, first: int = 0
) -> Iterator[tuple[range, np.ndarray]]:
    """Yield (replicate range, Y_k on H_g) with shape (chunk, n+1, 2^g)."""
    if n > analytic.EXACT_MAX_SCALE:
        raise CapacityError(f"prime model needs n <= {analytic.EXACT_MAX_SCALE}, got {n}")
    table = table_for_depth(n)
    grid = dyadic_grid(g)
    chunk = _block(chunk, table.scales_slice(-1, n).stop)
    for lo in range(first, first + replicates, chunk):
        reps = range(lo, min(lo + chunk, first + replicates))
        ph = sample_phases(table, seed, reps, k_max=n)
        yield reps, eval_increments_grid(ph, table, grid, n)


def pilot_max_quantile(n: int, g: int, q: float, replicates: int, seed: int) -> float:
    """Quantile of max_h X_n(h) over an independent pilot run (seed + 1)."""
    maxima = [inc.sum(axis=-2).max(axis=-1) for _, inc in field_increments(n, g, replicates, seed + 1)]
    return float(np.quantile(np.concatenate(maxima), q))


@dataclass
class MomentReport:
    e1: float
    e2: float
    p_hit: float
    se_e1: float
    se_e2: float
    se_p: float
    replicates: int
    pz: float
    se_pz: float
    counts: np.ndarray = field(repr=False)
    # regime -> share of E[Z^2] from pairs with that branching point range
    pair_regimes: dict | None = None

    def markov_ok(self) -> bool:
        return self.p_hit <= self.e1 + 3 * self.se_e1

    def pz_ok(self) -> bool:
        return self.pz - 3 * self.se_pz <= self.p_hit

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "counts"}
        return {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v) for k, v in d.items()}


def moments_from_counts(counts: np.ndarray, pair_regimes: dict | None = None) -> MomentReport:
    """Sample moments with jackknife standard errors."""
    z = np.asarray(counts, dtype=float)
    R = len(z)
    if R < 2:
        raise ValueError("need at least two replicates")
    hit = (z >= 1).astype(float)
    e1, e2, p = z.mean(), (z * z).mean(), hit.mean()

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(R))

    # leave-one-out means give the jackknife SE of the ratio e1^2 / e2
    l1 = (z.sum() - z) / (R - 1)
    l2 = ((z * z).sum() - z * z) / (R - 1)
    if e2 > 0:
        pz = pz_bound(e1, e2)
        with np.errstate(divide="ignore", invalid="ignore"):
            loo = np.where(l2 > 0, np.minimum(l1 * l1 / l2, 1.0), 0.0)
        se_pz = float(math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    else:
        pz, se_pz = 0.0, 0.0
    return MomentReport(e1, e2, p, se(z), se(z * z), se(hit), R, pz, se_pz, z, pair_regimes)


def regime_of(l: float, n: int, r: int, delta: float) -> str:
    """Which of the four second-moment regimes a branching point falls in."""
    if l <= r - delta:
        return "I"
    if l <= r + delta:
        return "II"
    if l < n - delta:
        return "III"
    return "IV"


def _lag_pairs(ind: np.ndarray) -> np.ndarray:
    """Sum over replicates of #{i : ind_i and ind_{i+d}} for every lag d."""
    G = ind.shape[-1]
    f = np.fft.rfft(ind.astype(float), n=2 * G, axis=-1)
    ac = np.fft.irfft(f * np.conj(f), n=2 * G, axis=-1)[..., :G]
    return np.rint(ac).sum(axis=0) if ac.ndim == 2 else np.rint(ac)


def estimate_moments(
    config: ExceedanceConfig,
    replicates: int,
    seed: int,
    pair_bins: bool = False,
    delta: float | None = None,
    chunk: int = 256,
) -> MomentReport:
    """Monte Carlo E[Z], E[Z^2], P(Z >= 1) on the prime model.

    With ``pair_bins`` the second moment is split over pairs (h1, h2) by
    branching point l = floor(log2 1/|h1-h2|) into regimes I-IV with
    Delta = ``delta`` (default r/100).
    """
    if replicates < 100:
        raise ValueError("estimate_moments needs >= 100 replicates")
    counts, lags = [], np.zeros(2**config.g)
    for _, inc in field_increments(config.n, config.g, replicates, seed, chunk):
        ind = _indicators(inc, config)
        counts.append(ind.sum(axis=-1))
        if pair_bins:
            lags += _lag_pairs(ind)
    counts = np.concatenate(counts)
    if np.all(counts == counts[0]) and counts[0] > 0:
        warnings.warn("degenerate configuration: Z has zero variance", RuntimeWarning, stacklevel=2)
    regimes = None
    if pair_bins:
        d = config.r / 100 if delta is None else delta
        r = max(config.r, 0)
        regimes = {"I": 0.0, "II": 0.0, "III": 0.0, "IV": 0.0}
        for lag, c in enumerate(lags):
            if c == 0:
                continue
            l = branching_point(lag * 2.0**-config.g) if lag else math.inf
            mult = 1 if lag == 0 else 2
            regimes[regime_of(l, config.n, r, d)] += mult * c / replicates
    return moments_from_counts(counts, regimes)


@dataclass
class ExceedanceRun:
    z: np.ndarray
    z_tilde: np.ndarray
    maxima: np.ndarray


def simulate_exceedances(
    config: ExceedanceConfig, tilde: ExceedanceConfig, replicates: int, seed: int, chunk: int = 256
) -> ExceedanceRun:
    """Per-replicate (Z, Z~, max) on shared fields; Z~ <= Z holds pathwise."""
    z, zt, mx = [], [], []
    for _, inc in field_increments(config.n, config.g, replicates, seed, chunk):
        z.append(count_with_barrier(inc, config))
        zt.append(count_with_barrier(inc, tilde))
        mx.append(inc.sum(axis=-2).max(axis=-1))
    return ExceedanceRun(np.concatenate(z), np.concatenate(zt), np.concatenate(mx))


# ---------------------------------------------------------------------------
# maxima


@dataclass
class MaxSummary:
    model: str
    n: int
    samples: np.ndarray = field(repr=False)
    quantiles: dict
    recentered_median: float
    fit: object = None

    def as_dict(self) -> dict:
        out = {"model": self.model, "n": self.n, "quantiles": self.quantiles,
               "recentered_median": self.recentered_median}
        if self.fit is not None:
            out["fit"] = self.fit._asdict()
        return out


def _summary(model, n, samples, fit=None) -> MaxSummary:
    qs = {str(q): float(np.quantile(samples, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
    rec = float(np.median(samples) - m_n(n, 0.0)) if n >= 1 else math.nan
    return MaxSummary(model, n, samples, qs, rec, fit)


def empirical_max_distribution(
    model: str,
    n: int,
    replicates: int,
    seed: int,
    g: int | None = None,
    sweep_depths=None,
    top_levels: int | None = None,
) -> MaxSummary:
    """Per-replicate maxima of the prime field on H_g or of a BRW of depth n.

    For ``model='brw'`` with ``sweep_depths`` the summary also carries the
    fitted (alpha, beta, gamma) across those depths.
    """
    if model == "prime":
        g = n if g is None else g
        mx = [inc.sum(axis=-2).max(axis=-1) for _, inc in field_increments(n, g, replicates, seed)]
        return _summary("prime", n, np.concatenate(mx))
    if model == "brw":
        samples = sample_brw_max(BrwParams(n), seed, range(replicates))
        fit = None
        if sweep_depths:
            fit = brw_sweep(sweep_depths, replicates, seed, top_levels=top_levels).fit
        return _summary("brw", n, samples, fit)
    raise ValueError(f"model must be 'prime' or 'brw', got {model!r}")


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class ComparisonReport:
    k: int
    dh: float
    samples: int
    ks_first: float
    ks_second: float
    ks_sum: float
    corr: float
    corr_se: float
    corr_analytic: float

    @property
    def corr_z(self) -> float:
        return (self.corr - self.corr_analytic) / self.corr_se if self.corr_se > 0 else 0.0


def gaussian_comparison(y1: np.ndarray, y2: np.ndarray, k: int, dh: float) -> ComparisonReport:
    """KS distances of (Y_k(h), Y_k(h+dh)) and their sum to matched Gaussians.

    Each marginal is compared with N(sample mean, sigma_k^2), the sum with
    N(sample mean, 2 (sigma_k^2 + rho_k)); the sample correlation is set
    against rho_k / sigma_k^2 with the normal-theory SE (1 - rho^2)/sqrt(N).
    """
    y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
    N = len(y1)
    if N < MIN_COMPARISON_SAMPLES or len(y2) != N:
        raise ValueError(f"need >= {MIN_COMPARISON_SAMPLES} paired samples, got {N}")
    s2 = analytic.variance_scale(k)
    rho = analytic.covariance_scale(k, dh)
    sd = math.sqrt(s2)

    def ks(x, var):
        return float(stats.kstest(x, "norm", args=(x.mean(), math.sqrt(var))).statistic)

    corr = float(np.corrcoef(y1, y2)[0, 1]) if np.std(y1) > 0 and np.std(y2) > 0 else 1.0
    if np.array_equal(y1, y2):
        corr = 1.0
    ra = rho / s2
    return ComparisonReport(
        k, dh, N, ks(y1, s2), ks(y2, s2), ks(y1 + y2, 2 * (s2 + rho)),
        corr, (1 - ra * ra) / math.sqrt(N), ra,
    )


def oscillation_stat(values: np.ndarray, grid: np.ndarray, center: float, k: int) -> np.ndarray:
    """max over |h' - center| <= 2^{-k-1} of the field minus its value at ``center``.

    ``values`` has the grid on its last axis; the grid spacing must be at
    most 2^{-(k+4)}.
    """
    grid = np.asarray(grid, float)
    if len(grid) > 1:
        step = float(np.min(np.diff(grid)))
        if step > 2.0 ** -(k + 4) * (1 + 1e-12):
            raise ValueError(f"grid spacing {step} coarser than 2^-(k+4)")
    ci = np.flatnonzero(np.isclose(grid, center, rtol=0, atol=1e-15))
    if len(ci) != 1:
        raise ValueError(f"center {center} is not a grid point")
    win = np.abs(grid - center) <= 2.0 ** (-k - 1) + 1e-15
    v = np.asarray(values, float)
    return v[..., win].max(axis=-1) - v[..., ci[0]]


def joint_bound(n: int, l: int, r: int, delta: float, eps: float, c: float = 1.0) -> float:
    """c 2^{-(2n-l)} 2^{19 Delta + r} (n-r)^{(3/2+2eps)(2-(l+3Delta-r)/(n-r))}
    / ((n-l-Delta)^3 (l-Delta-r)^{3/2}); nan outside r+Delta < l <= n-Delta."""
    if not (r + delta < l <= n - delta) or n - l - delta <= 0 or l - delta - r <= 0:
        return math.nan
    expo = (1.5 + 2 * eps) * (2 - (l + 3 * delta - r) / (n - r))
    return (
        c * 2.0 ** (-(2 * n - l)) * 2.0 ** (19 * delta + r) * (n - r) ** expo
        / ((n - l - delta) ** 3 * (l - delta - r) ** 1.5)
    )


def two_point_joint_prob(
    h1: float,
    h2: float,
    config: ExceedanceConfig,
    replicates: int,
    seed: int,
    eps: float = 0.0,
    delta_scale: float | None = None,
    c: float = 1.0,
    chunk: int = 2048,
) -> dict:
    """MC estimate of P[J(h1) and J(h2)] with the branching-after-r bound beside it.

    At desk-scale n this is a structural diagnostic only.
    """
    n = config.n
    if n > analytic.EXACT_MAX_SCALE:
        raise CapacityError(f"prime model needs n <= {analytic.EXACT_MAX_SCALE}")
    table = table_for_depth(n)
    pts = np.array([h1, h2], dtype=float)
    chunk = _block(chunk, table.scales_slice(-1, n).stop)
    both, single = 0, 0
    for lo in range(0, replicates, chunk):
        reps = range(lo, min(lo + chunk, replicates))
        ph = sample_phases(table, seed, reps, k_max=n)
        ind = _indicators(eval_increments_grid(ph, table, pts, n), config)
        both += int(np.count_nonzero(ind[:, 0] & ind[:, 1]))
        single += int(np.count_nonzero(ind[:, 0]))
    p = both / replicates
    l = branching_point(abs(h2 - h1))
    r = max(config.r, 0)
    d = r / 100 if delta_scale is None else delta_scale
    bound = joint_bound(n, l, r, d, eps, c) if math.isfinite(l) else math.nan
    return {
        "h1": h1, "h2": h2, "l": l, "estimate": p,
        "se": math.sqrt(p * (1 - p) / replicates),
        "single": single / replicates, "bound": bound, "replicates": replicates,
    }


def brw_z_tilde(
    depth: int, eps: float, intercept: float, replicates: int, seed: int, slope: float = LOG2
) -> tuple[float, float, float]:
    """BRW surrogate: (mean Z(m_n(eps)), mean Z~, SE of Z~) with barrier k slope + intercept."""
    params = BrwParams(depth)
    m = m_n(depth, eps)
    rows = np.array([brw_exceedances(params, m, slope, intercept, seed, r)[:2] for r in range(replicates)], float)
    zt = rows[:, 1]
    return float(rows[:, 0].mean()), float(zt.mean()), float(zt.std(ddof=1) / math.sqrt(replicates))
