"""Experiment routines behind the command line.

Each routine takes plain keyword parameters and returns a
:class:`Result`: a table (column names plus rows), a JSON-friendly summary
and a dict of named pass/fail checks. The CLI writes these out; the
acceptance tests call the same routines directly.

Replicates are split into fixed chunks whose results are combined in chunk
order, so the numbers do not depend on ``workers``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import analytic, primes
from .analytic import LOG2, SIGMA_SQ
from .exceed import (
    ExceedanceConfig,
    empirical_max_distribution,
    estimate_moments,
    gaussian_comparison,
    j_minus_config,
    oscillation_stat,
    pilot_max_quantile,
    simulate_exceedances,
    two_point_joint_prob,
    z_tilde_config,
)
from .model import (
    dyadic_grid,
    eval_field_grid,
    eval_increments,
    sample_phases,
    sample_phases_tilted_one,
    sample_phases_tilted_two,
)
from .walks import BallotQuery, ballot_dp, ballot_mc, brw_sweep, iid_sweep

CHUNK = 2000
# cap on angles held per chunk (doubles), about 64 MB
CHUNK_CELLS = 1 << 23


@dataclass
class Result:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _chunks(replicates: int, size: int = CHUNK, k: int | None = None) -> list[range]:
    """Replicate blocks; with ``k`` the block shrinks so angles for scales 0..k fit CHUNK_CELLS."""
    if k is not None:
        n_p = primes.table_for_depth(max(k, 1)).scales_slice(-1, k).stop
        size = max(1, min(size, CHUNK_CELLS // n_p))
    return [range(lo, min(lo + size, replicates)) for lo in range(0, replicates, size)]


def _map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


# ---------------------------------------------------------------------------


def sieve(log_limit: float = 4.0, cache: str | None = None) -> Result:
    """Primes with log p <= log_limit and their dyadic scales."""
    table = primes.sieve(log_limit)
    if cache:
        primes.save_cache(table, cache)
    scales = table.scale_of()
    rows = [(int(p), float(lp), int(s)) for p, lp, s in zip(table.primes, table.log_p, scales)]
    ok_sorted = bool(np.all(np.diff(table.primes) > 0))
    summary = {"n_primes": len(table), "fingerprint": table.fingerprint(), "max_scale": table.max_scale}
    return Result(["p", "log_p", "scale"], rows, summary, {"strictly_increasing": ok_sorted})


# ---------------------------------------------------------------------------


def _cov_chunk(args):
    k, dh, seed, reps = args
    table = primes.table_for_depth(max(k, 1))
    ph = sample_phases(table, seed, reps, k_max=k)
    y0 = eval_increments(ph, table, 0.0, k)[:, k]
    y1 = eval_increments(ph, table, dh, k)[:, k]
    return y0 * y1


def verify_covariance(
    k_max: int = 4,
    dh: float = 0.25,
    replicates: int = 10**5,
    replicates_top: int | None = None,
    seed: int = 0,
    tol_near: float = 0.05,
    c_max: float = 2.0,
    workers: int = 1,
) -> Result:
    """Exact and integral sigma_k^2, rho_k(dh) with Monte Carlo estimates of rho_k.

    Scales at or below the branching point of ``dh`` must have rho_k within
    ``tol_near`` of sigma_k^2; above it |rho_k| <= C 2^-(k - bp) with the
    reported C at most ``c_max``. ``replicates_top`` (default
    ``replicates``) sets the sample size at k = 4, where each sample needs
    all 595k primes.
    """
    if not 0 <= k_max <= analytic.EXACT_MAX_SCALE:
        raise primes.CapacityError(f"k_max={k_max} outside exact range 0..{analytic.EXACT_MAX_SCALE}")
    bp = analytic.branching_point(dh)
    rows, checks, C = [], {}, 0.0
    for k in range(k_max + 1):
        ex, it = analytic.ScaleStatistics(k), analytic.ScaleStatistics(k, "integral")
        rho = ex.rho_k(dh)
        R = replicates if (k < 4 or replicates_top is None) else replicates_top
        mc, se = math.nan, math.nan
        if R > 0:
            prod = np.concatenate(_map(_cov_chunk, [(k, dh, seed + k, c) for c in _chunks(R, k=k)], workers))
            mc, se = _mean_se(prod)
            checks[f"mc_k{k}"] = abs(mc - rho) <= 3 * se
        if k <= bp:
            checks[f"near_k{k}"] = abs(rho - ex.sigma_sq_k) < tol_near
        else:
            C = max(C, abs(rho) * 2.0 ** (k - bp))
        rows.append((k, ex.sigma_sq_k, it.sigma_sq_k, rho, it.rho_k(dh), mc, se, R))
    if k_max > bp:
        checks["decay_constant"] = C <= c_max
    summary = {"branching_point": bp, "C": C}
    cols = ["k", "sigma_sq_exact", "sigma_sq_integral", "rho_exact", "rho_integral", "rho_mc", "rho_mc_se", "replicates"]
    return Result(cols, rows, summary, checks)


# ---------------------------------------------------------------------------


def _cgf_chunk(args):
    ks, lams, h, seed, reps = args
    kmax = max(ks)
    table = primes.table_for_depth(max(kmax, 1))
    ph = sample_phases(table, seed, reps, k_max=kmax)
    y = eval_increments(ph, table, h, kmax)
    # exp(lam Y_k) for every (k, lam), replicates last
    return np.exp(np.asarray(lams)[None, :, None] * y[:, ks].T[:, None, :])


def verify_cgf(
    ks: Sequence[int] = (1, 2, 3),
    lams: Sequence[float] = (0.5, 1.0),
    replicates: int = 10**6,
    seed: int = 0,
    h: float = 0.0,
    workers: int = 1,
) -> Result:
    """log of the sample mean of exp(lam Y_k) against the exact Bessel CGF."""
    ks = [int(k) for k in ks]
    if max(ks) > analytic.EXACT_MAX_SCALE:
        raise primes.CapacityError(f"scale {max(ks)} beyond exact range")
    parts = _map(_cgf_chunk, [(ks, list(lams), h, seed, c) for c in _chunks(replicates, 20000, max(ks))], workers)
    w = np.concatenate(parts, axis=-1)
    rows, checks = [], {}
    for i, k in enumerate(ks):
        for j, lam in enumerate(lams):
            m, se = _mean_se(w[i, j])
            est, se_log = math.log(m), se / m
            cgf = analytic.cgf_one(k, lam)
            ok = abs(est - cgf.value) <= 3 * se_log
            checks[f"k{k}_lam{lam}"] = ok
            rows.append((k, float(lam), cgf.value, cgf.quadratic, est, se_log, (est - cgf.value) / se_log))
    return Result(["k", "lam", "cgf_exact", "cgf_quadratic", "log_mc", "se", "z"], rows, {"replicates": replicates}, checks)


# ---------------------------------------------------------------------------


def _tilt_chunk(args):
    k, lam, lam2, h, dh, seed, reps = args
    table = primes.table_for_depth(k)
    if lam2 is None:
        ph = sample_phases_tilted_one(table, lam, h, k, seed, reps)
        return eval_increments(ph, table, h, k)[:, k][:, None]
    ph = sample_phases_tilted_two(table, (lam, lam2), h, h + dh, k, seed, reps)
    return np.stack([eval_increments(ph, table, x, k)[:, k] for x in (h, h + dh)], axis=1)


def verify_tilt(
    k: int = 3,
    lam: float = 1.0,
    h: float = 0.0,
    replicates: int = 20000,
    seed: int = 0,
    lam2: float | None = None,
    dh: float = 0.25,
    tol_linear: float = 0.01,
    workers: int = 1,
) -> Result:
    """Moments of Y_k under the exact tilt against the analytic tilted moments.

    One-point by default; with ``lam2`` the two-point tilt at (h, h + dh).
    """
    if not 1 <= k <= analytic.EXACT_MAX_SCALE:
        raise primes.CapacityError(f"k={k} outside 1..{analytic.EXACT_MAX_SCALE}")
    y = np.concatenate(_map(_tilt_chunk, [(k, lam, lam2, h, dh, seed, c) for c in _chunks(replicates, k=k)], workers))
    rows, checks = [], {}
    if lam2 is None:
        mean_a, var_a = analytic.tilted_moments_one(k, lam)
        x = y[:, 0]
        m, se_m = _mean_se(x)
        v = float(x.var(ddof=1))
        se_v = math.sqrt(max(np.mean((x - m) ** 4) - v * v, 0.0) / len(x))
        linear = lam * analytic.variance_scale(k)
        rows += [("mean", m, se_m, mean_a), ("variance", v, se_v, var_a), ("lam_sigma_sq", m, se_m, linear)]
        checks["mean"] = abs(m - mean_a) <= 3 * se_m
        checks["variance"] = abs(v - var_a) <= 3 * se_v
        checks["mean_linear"] = abs(m - linear) <= tol_linear
    else:
        mean_a, H = analytic.tilted_moments_two(k, (lam, lam2), dh)
        lin = analytic.ScaleStatistics(k).covariance_matrix(dh) @ [lam, lam2]
        cov = np.cov(y.T)
        for i in range(2):
            m, se = _mean_se(y[:, i])
            rows.append((f"mean{i + 1}", m, se, float(mean_a[i])))
            checks[f"mean{i + 1}"] = abs(m - mean_a[i]) <= 3 * se
            checks[f"mean{i + 1}_linear"] = abs(m - lin[i]) <= 3 * se + 2 * tol_linear
        rows.append(("cov12", float(cov[0, 1]), math.nan, float(H[0, 1])))
    return Result(["stat", "empirical", "se", "analytic"], rows, {"k": k, "replicates": replicates}, checks)


# ---------------------------------------------------------------------------


def field_max(model: str = "prime", n: int = 3, g: int | None = None, replicates: int = 500, seed: int = 0) -> Result:
    """Samples of max X_n over a grid for the prime or BRW model."""
    s = empirical_max_distribution(model, n, replicates, seed, g=g)
    rows = [(i, float(v)) for i, v in enumerate(s.samples)]
    return Result(["replicate", "max"], rows, s.as_dict(), {"finite": bool(np.all(np.isfinite(s.samples)))})


def brw_max(
    depths: Sequence[int] = (12, 14, 16, 18, 20),
    replicates: int = 10**5,
    seed: int = 0,
    top_levels: int | None = 8,
    alpha_tol: float = 0.02,
    beta_range: tuple = (0.5, 1.0),
    iid_beta_range: tuple = (0.1, 0.45),
    bootstrap: int = 200,
) -> Result:
    """Depth sweep of BRW and independent-points maxima with the median-law fit."""
    brw = brw_sweep(depths, replicates, seed, top_levels=top_levels, bootstrap=bootstrap)
    iid = iid_sweep(depths, replicates, seed, bootstrap=bootstrap)
    rows = [("brw", n, float(m), analytic.m_n(n)) for n, m in zip(depths, brw.medians)]
    rows += [("iid", n, float(m), analytic.m_n(n)) for n, m in zip(depths, iid.medians)]
    fb, fi = brw.fit, iid.fit
    checks = {
        "alpha": abs(fb.alpha - LOG2) <= alpha_tol,
        "beta_brw": beta_range[0] <= fb.beta <= beta_range[1],
        "beta_iid": iid_beta_range[0] <= fi.beta <= iid_beta_range[1],
        "ordering": fi.beta < fb.beta,
    }
    summary = {"brw_fit": fb._asdict(), "brw_fit_se": {k: float(v) for k, v in brw.fit_se._asdict().items()},
               "iid_fit": fi._asdict(), "iid_fit_se": {k: float(v) for k, v in iid.fit_se._asdict().items()},
               "replicates": replicates, "top_levels": top_levels}
    return Result(["model", "n", "median", "m_n"], rows, summary, checks)


# ---------------------------------------------------------------------------


def ballot(
    ns: Sequence[int] = (64, 128, 256, 512),
    a: float = 1.0,
    b: float = 0.0,
    delta: float = 1.0,
    variance: float = SIGMA_SQ,
    method: str = "dp",
    mesh: float = 0.02,
    paths: int = 10**6,
    seed: int = 0,
    scaling_tol: float = 0.15,
) -> Result:
    """Ballot probabilities by DP and/or MC; method in {dp, mc, both}."""
    if method not in ("dp", "mc", "both"):
        raise ValueError(f"method must be dp, mc or both, got {method!r}")
    rows, checks, scaled = [], {}, []
    for n in ns:
        q = BallotQuery(int(n), a, b, delta, variance)
        dp = mc = None
        if method in ("dp", "both"):
            dp = ballot_dp(q, mesh=mesh)
            rows.append((int(n), dp.value, dp.error, "dp"))
            scaled.append(dp.value * n**1.5)
        if method in ("mc", "both"):
            mc = ballot_mc(q, paths=paths, seed=seed)
            rows.append((int(n), mc.value, mc.error, "mc"))
        if dp is not None and mc is not None:
            checks[f"dp_mc_n{n}"] = abs(dp.value - mc.value) <= 3 * mc.error + dp.error
    summary = {}
    if len(scaled) > 1:
        var = [abs(y / x - 1) for x, y in zip(scaled, scaled[1:])]
        summary["n32_prob"] = scaled
        summary["successive_variation"] = var
        checks["n32_scaling"] = max(var) < scaling_tol
    return Result(["n", "estimate", "se_or_error", "method"], rows, summary, checks)


# ---------------------------------------------------------------------------


def exceedances(
    n: int = 3,
    g: int = 9,
    replicates: int = 2000,
    seed: int = 0,
    quantile: float = 0.8,
    pilot_replicates: int = 1000,
    m: float | None = None,
    barrier_intercept: float = 1.0,
) -> Result:
    """Z and Z~ at a level set from a pilot run, with the Markov / PZ sandwich."""
    if m is None:
        m = pilot_max_quantile(n, g, quantile, pilot_replicates, seed)
    cfg = ExceedanceConfig(m, n, g)
    rep = estimate_moments(cfg, replicates, seed, pair_bins=True, delta=0.5)
    run = simulate_exceedances(cfg, z_tilde_config(m, n, g, barrier_intercept), replicates, seed)
    rows = [(i, int(z), int(zt), float(x)) for i, (z, zt, x) in enumerate(zip(run.z, run.z_tilde, run.maxima))]
    checks = {
        "markov": rep.markov_ok(),
        "paley_zygmund": rep.pz_ok(),
        "pathwise_z_tilde": bool(np.all(run.z_tilde <= run.z)),
    }
    summary = {"m": m, **rep.as_dict(), "mean_z_tilde": float(run.z_tilde.mean())}
    return Result(["replicate", "Z", "Z_tilde", "max"], rows, summary, checks)


# ---------------------------------------------------------------------------


def _osc_chunk(args):
    n, k, r, g, center, seed, reps = args
    table = primes.table_for_depth(n)
    grid = dyadic_grid(g, (center - 2.0 ** (-k - 1), center + 2.0 ** (-k - 1)), closed=True)
    ph = sample_phases(table, seed, reps, k_max=k)
    vals = eval_field_grid(ph, table, grid, r, k)
    osc = oscillation_stat(vals, grid, center, k)
    ci = int(np.argmin(np.abs(grid - center)))
    return np.stack([osc, vals[:, ci]], axis=1)


def oscillation(
    n: int = 3,
    k: int = 3,
    r: int = 0,
    g: int = 12,
    a: float = 2.0,
    xs: Sequence[float] = (0.5, 1.0, 1.5),
    replicates: int = 10**4,
    seed: int = 0,
    center: float = 0.5,
    c_max: float = 10.0,
    workers: int = 1,
) -> Result:
    """Frequency of {oscillation >= a, centre value <= x} against the chaining bound.

    The bound's prefactor is calibrated as the smallest c covering every x
    (with c_exp = 1); ``c_upper`` adds three binomial standard errors.
    """
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    data = np.concatenate(_map(_osc_chunk, [(n, k, r, g, center, seed, c) for c in _chunks(replicates, k=k)], workers))
    osc, cen = data[:, 0], data[:, 1]
    freqs, shapes, rows = [], [], []
    for x in xs:
        ev = (osc >= a) & (cen <= x)
        p = float(ev.mean())
        shape = analytic.oscillation_bound(x, a, k, r, c_exp=1.0, c=1.0)
        freqs.append(p)
        shapes.append(shape)
        rows.append((float(x), p, math.sqrt(p * (1 - p) / replicates), shape))
    cal = analytic.calibrate_constant(freqs, shapes, replicates)
    summary = {"c_star": cal.c_star, "c_upper": cal.c_upper, "a": a, "replicates": replicates,
               "osc_quantiles": {str(q): float(np.quantile(osc, q)) for q in (0.5, 0.9, 0.99, 1.0)}}
    checks = {"c_star": cal.c_star <= c_max}
    return Result(["x", "frequency", "se", "bound_c1"], rows, summary, checks)


# ---------------------------------------------------------------------------


def compare_gaussian(
    k: int = 3, dh: float = 0.25, replicates: int = 10**5, seed: int = 0, ks_max: float = 0.02, workers: int = 1
) -> Result:
    """KS distances of scale-k increments to matched Gaussians and the correlation check."""
    if not 0 <= k <= analytic.EXACT_MAX_SCALE:
        raise primes.CapacityError(f"k={k} outside exact range")

    table = primes.table_for_depth(max(k, 1))
    ys = []
    for c in _chunks(replicates, 20000, k):
        ph = sample_phases(table, seed, c, k_max=k)
        ys.append(np.stack([eval_increments(ph, table, h, k)[:, k] for h in (0.0, dh)], axis=1))
    y = np.concatenate(ys)
    rep = gaussian_comparison(y[:, 0], y[:, 1], k, dh)
    rows = [("ks_first", rep.ks_first), ("ks_second", rep.ks_second), ("ks_sum", rep.ks_sum),
            ("corr", rep.corr), ("corr_se", rep.corr_se), ("corr_analytic", rep.corr_analytic)]
    checks = {"correlation": abs(rep.corr_z) <= 3}
    # with only a handful of primes the KS distance is diagnostic only
    if k >= 3:
        checks["ks"] = max(rep.ks_first, rep.ks_second, rep.ks_sum) <= ks_max
    return Result(["stat", "value"], rows, {"k": k, "dh": dh, "samples": rep.samples}, checks)


# ---------------------------------------------------------------------------


def joint(
    n: int = 3,
    r: int = 0,
    eps: float = 0.1,
    g: int = 6,
    delta: float = 1.0,
    ls: Sequence[int] = (0, 1, 2),
    replicates: int = 40000,
    seed: int = 0,
    c: float = 1.0,
) -> Result:
    """P[J-(h1) and J-(h2)] by branching point with the bound formula beside it.

    J- uses the level m_{n-r}(-eps); the pair for branching point l is
    (0, 1.5 2^-(l+1)).
    """
    sc = analytic.scaling_constants(n, -eps, r=r)
    cfg = j_minus_config(sc, g, delta)
    rows = []
    for l in ls:
        d = two_point_joint_prob(0.0, 1.5 * 2.0 ** -(l + 1), cfg, replicates, seed, eps=eps, c=c)
        rows.append((d["l"], d["h1"], d["h2"], d["estimate"], d["se"], d["single"], d["bound"]))
    checks = {}
    est = [(row[3], row[4]) for row in sorted(rows)]
    if len(est) > 1:
        # decorrelation trend: later branching never has a clearly smaller joint probability
        checks["trend"] = all(p0 <= p1 + 3 * math.hypot(s0, s1) for (p0, s0), (p1, s1) in zip(est, est[1:]))
    return Result(["l", "h1", "h2", "estimate", "se", "single", "bound"], rows,
                  {"level": cfg.window[0], "replicates": replicates}, checks)
