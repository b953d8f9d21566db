"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Run with ``pytest tests/test_acceptance.py`` (one PASS/FAIL line per
criterion is printed in the terminal summary) or as a script.
"""
import math
import sys
import time
from fractions import Fraction

import pytest

from randzeta import analytic, experiments, primes

RESULTS = {}
SEED = 20240611


def record(n, ok, detail, elapsed, budget=None):
    if budget is not None:
        detail += f"; {elapsed:.1f}s (budget {budget}s)"
        ok = ok and elapsed < budget
    else:
        detail += f"; {elapsed:.1f}s"
    RESULTS[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def fails(res):
    return ",".join(k for k, v in res.checks.items() if not v) or "none"


def test_c01_exact_scale_variance():
    t0 = time.perf_counter()
    v1 = analytic.variance_scale(1)
    v2 = analytic.variance_scale(2)
    o1 = float(Fraction(1, 6) + Fraction(1, 10) + Fraction(1, 14))
    twelve = [11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]
    o2 = float(sum(Fraction(1, 2 * p) for p in twelve))
    el = time.perf_counter() - t0
    ok = abs(v1 - o1) <= 1e-12 and abs(v1 - 0.3380952380952381) <= 1e-12 and abs(v2 - o2) <= 1e-12
    assert record(1, ok, f"sigma_1^2={v1!r} sigma_2^2={v2!r}", el, 1)


def test_c02_mertens():
    t0 = time.perf_counter()
    table = primes.sieve(math.log(8.9e6))
    s = primes.mertens_sum(table, math.exp(8), math.exp(16))
    el = time.perf_counter() - t0
    ok = abs(s - math.log(2)) <= 0.02
    assert record(2, ok, f"sum={s:.5f} vs log2={math.log(2):.5f}, {len(table)} primes", el, 10)


def test_c03_cgf_identity():
    t0 = time.perf_counter()
    res = experiments.verify_cgf((1, 2, 3), (0.5, 1.0), 10**6, SEED)
    el = time.perf_counter() - t0
    zs = ", ".join(f"k{r[0]} lam{r[1]}: z={r[6]:+.2f}" for r in res.rows)
    assert record(3, res.passed, f"{zs}", el, 120)


def test_c04_tilted_sampling():
    t0 = time.perf_counter()
    res = experiments.verify_tilt(k=3, lam=1.0, replicates=10**5, seed=SEED)
    el = time.perf_counter() - t0
    mean, var, lin = res.rows
    detail = f"mean {mean[1]:.5f}+-{mean[2]:.5f} (exact {mean[3]:.5f}, lam*sigma^2 {lin[3]:.5f}), var {var[1]:.5f}+-{var[2]:.5f} (exact {var[3]:.5f})"
    assert record(4, res.passed, detail, el, 60)


def test_c05_covariance_branching():
    # scales 0..3 at 1e5 samples; scale 4 (595k primes per sample) at 1e4
    t0 = time.perf_counter()
    res = experiments.verify_covariance(k_max=4, dh=0.25, replicates=10**5, replicates_top=10**4, seed=SEED)
    el = time.perf_counter() - t0
    gaps = ", ".join(f"k{r[0]}: |rho-s2|={abs(r[3] - r[1]):.4f}" for r in res.rows if r[0] <= 2)
    detail = f"{gaps}; C={res.summary['C']:.3f}; failed checks: {fails(res)}"
    assert record(5, res.passed, detail, el)


def test_c06_gaussian_comparison():
    t0 = time.perf_counter()
    res = experiments.compare_gaussian(k=3, dh=0.25, replicates=10**5, seed=SEED)
    el = time.perf_counter() - t0
    v = dict(res.rows)
    detail = (f"KS {v['ks_first']:.4f}/{v['ks_second']:.4f}/{v['ks_sum']:.4f}, "
              f"corr {v['corr']:.4f} vs {v['corr_analytic']:.4f} (se {v['corr_se']:.4f})")
    assert record(6, res.passed, detail, el)


def test_c07_ballot_scaling():
    t0 = time.perf_counter()
    dp = experiments.ballot((64, 128, 256, 512), 1.0, 0.0, 1.0, method="dp")
    both = experiments.ballot((256,), 1.0, 0.0, 1.0, method="both", paths=10**6, seed=SEED)
    el = time.perf_counter() - t0
    n32 = ", ".join(f"{x:.3f}" for x in dp.summary["n32_prob"])
    (_, p_dp, e_dp, _), (_, p_mc, se_mc, _) = both.rows
    detail = f"n^1.5 P = {n32}; n=256 dp {p_dp:.6f}(+-{e_dp:.1e}) mc {p_mc:.6f}+-{se_mc:.1e}"
    assert record(7, dp.passed and both.passed, detail, el, 300)


def test_c08_brw_subleading():
    t0 = time.perf_counter()
    res = experiments.brw_max((12, 14, 16, 18, 20), 10**5, SEED, top_levels=8)
    el = time.perf_counter() - t0
    b, bse, i = res.summary["brw_fit"], res.summary["brw_fit_se"], res.summary["iid_fit"]
    detail = (f"BRW alpha {b['alpha']:.4f}+-{bse['alpha']:.4f} beta {b['beta']:.3f}+-{bse['beta']:.3f}; "
              f"iid beta {i['beta']:.3f}")
    assert record(8, res.passed, detail, el, 900)


def test_c09_moment_sandwiches():
    t0 = time.perf_counter()
    res = experiments.exceedances(n=3, g=9, replicates=2000, seed=SEED, quantile=0.8)
    el = time.perf_counter() - t0
    s = res.summary
    detail = (f"m={s['m']:.4f} E[Z]={s['e1']:.3f} E[Z^2]={s['e2']:.2f} P(Z>=1)={s['p_hit']:.4f} "
              f"PZ={s['pz']:.4f}+-{s['se_pz']:.4f} mean Z~={s['mean_z_tilde']:.3f}")
    assert record(9, res.passed, detail, el, 300)


def test_c10_oscillation_bound():
    t0 = time.perf_counter()
    res = experiments.oscillation(n=3, k=3, r=0, g=12, a=2.0, xs=(0.5, 1.0, 1.5), replicates=10**4, seed=SEED)
    el = time.perf_counter() - t0
    s = res.summary
    freqs = ", ".join(f"x={r[0]}: {r[1]:.4f} vs {r[3]:.4f}" for r in res.rows)
    detail = f"{freqs}; c*={s['c_star']:.3f} (upper {s['c_upper']:.3f}); max osc {s['osc_quantiles']['1.0']:.3f}"
    assert record(10, res.passed, detail, el, 300)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
