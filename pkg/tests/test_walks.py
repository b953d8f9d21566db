import math
import warnings

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import ndtr

from randzeta.analytic import SIGMA_SQ, RegimeWarning, m_n
from randzeta.rng import STREAM_BRW, CounterRNG
from randzeta.walks import (
    AccuracyError,
    BallotQuery,
    BarrierSpec,
    BrwParams,
    ballot_bounds,
    ballot_dp,
    ballot_mc,
    barrier_walk_prob,
    brw_exceedances,
    brw_max_law,
    fit_max_law,
    sample_brw_max,
    sample_iid_max,
)

SD = math.sqrt(SIGMA_SQ)


def test_brw_params_validation():
    with pytest.raises(ValueError):
        BrwParams(25)
    with pytest.raises(ValueError):
        BrwParams(3, variance=0.0)
    with pytest.raises(ValueError):
        BrwParams(3, tail_depth=4)


def test_depth_zero_and_one_by_hand():
    z = CounterRNG(7, STREAM_BRW).normal(3, 0, 3)
    assert sample_brw_max(BrwParams(0), 7, 3) == pytest.approx(SD * z[0], abs=1e-15)
    assert sample_brw_max(BrwParams(1), 7, 3) == pytest.approx(SD * (z[0] + max(z[1], z[2])), abs=1e-15)
    assert sample_brw_max(BrwParams(1, mean=0.5), 7, 3) == pytest.approx(1.0 + SD * (z[0] + max(z[1], z[2])), abs=1e-15)


def test_brw_replicate_batch_matches_single():
    batch = sample_brw_max(BrwParams(6), 1, range(5))
    assert np.array_equal(batch, [sample_brw_max(BrwParams(6), 1, r) for r in range(5)])


def test_max_law_small_depths():
    x = np.array([-0.5, 0.0, 0.7, 1.5])
    law0 = brw_max_law(0)
    assert np.allclose(np.interp(x, law0.x, law0.cdf), ndtr(x / SD), atol=1e-6)
    # depth 1 with root edge: P(Y0 + max(Y1, Y2) <= x) = int phi(y) Phi((x-y)/sd)^2 dy
    law1 = brw_max_law(1)
    for xi in x:
        want, _ = integrate.quad(lambda y: stats.norm.pdf(y, scale=SD) * ndtr((xi - y) / SD) ** 2, -10, 10)
        assert np.interp(xi, law1.x, law1.cdf) == pytest.approx(want, abs=2e-4)


def test_max_law_matches_full_tree():
    s = sample_brw_max(BrwParams(8), 3, range(3000))
    law = brw_max_law(8)
    p = stats.kstest(s, lambda v: np.interp(v, law.x, law.cdf)).pvalue
    assert p > 0.001


def test_hybrid_sampler_matches_full_tree():
    full = sample_brw_max(BrwParams(10), 4, range(2000))
    hyb = sample_brw_max(BrwParams(10, tail_depth=5), 5, range(2000))
    assert stats.ks_2samp(full, hyb).pvalue > 0.001


def test_depth16_median_band():
    s = sample_brw_max(BrwParams(16), 16, range(400))
    assert m_n(16) == pytest.approx(9.011, abs=1e-3)
    assert abs(np.median(s) - m_n(16)) <= 2.0


def test_iid_max_law():
    n = 10
    s = sample_iid_max(n, 2, range(4000))
    cdf = lambda v: ndtr(v / math.sqrt(n * SIGMA_SQ)) ** (2**n)
    assert stats.kstest(s, cdf).pvalue > 0.001


def test_fit_recovers_coefficients():
    n = np.arange(10, 21)
    fit = fit_max_law(n, 0.7 * n - 0.6 * np.log(n) + 0.1)
    assert fit.alpha == pytest.approx(0.7) and fit.beta == pytest.approx(0.6) and fit.gamma == pytest.approx(0.1)


def test_brw_exceedances():
    p = BrwParams(8)
    for rep in range(20):
        z, zt, mx = brw_exceedances(p, 3.0, math.log(2), 1.0, 9, rep)
        assert 0 <= zt <= z
        assert mx == pytest.approx(sample_brw_max(p, 9, rep), abs=1e-12)
        z2, zt2, _ = brw_exceedances(p, 3.0, math.log(2), 1e9, 9, rep)
        assert z2 == zt2 == z
    with pytest.raises(ValueError):
        brw_exceedances(BrwParams(8, tail_depth=2), 3.0, 0.7, 1.0, 0, 0)


def test_ballot_single_step():
    q = BallotQuery(1, 1.0, 0.0, 1.0)
    assert ballot_dp(q).value == pytest.approx(ndtr(1 / SD) - 0.5, abs=1e-12)
    assert ballot_dp(q).value == pytest.approx(0.4553, abs=1e-3)


def test_ballot_impossible_window():
    assert ballot_dp(BallotQuery(10, 1.0, 1.0, 0.5)).value == 0.0
    assert ballot_dp(BallotQuery(10, 1.0, 2.0, 0.5)).value == 0.0


def test_ballot_query_validation():
    with pytest.raises(ValueError):
        BallotQuery(0, 1, 0, 1)
    with pytest.raises(ValueError):
        BallotQuery(5, 1, 0, 0)


def test_dp_two_steps_exact():
    # P(S_1 <= a, S_2 in (b, b + d)) by quadrature
    a, b, d = 0.4, -0.3, 0.5
    want, _ = integrate.quad(
        lambda y: stats.norm.pdf(y, scale=SD) * (ndtr((b + d - y) / SD) - ndtr((b - y) / SD)), -12 * SD, a
    )
    assert ballot_dp(BallotQuery(2, a, b, d)).value == pytest.approx(want, abs=1e-6)


def test_dp_vs_mc():
    q = BallotQuery(32, 1.0, 0.0, 1.0)
    dp, mc = ballot_dp(q), ballot_mc(q, paths=10**6, seed=3)
    assert abs(dp.value - mc.value) <= 3 * mc.error + dp.error


def test_mc_reproducible():
    q = BallotQuery(16, 1.0, 0.0, 1.0)
    assert ballot_mc(q, 10**4, 5) == ballot_mc(q, 10**4, 5)


def test_mesh_halving_within_error_estimate():
    for n in (16, 64, 256):
        q = BallotQuery(n, 1.0, 0.0, 1.0)
        a, b = ballot_dp(q, mesh=0.02), ballot_dp(q, mesh=0.01)
        assert abs(a.value - b.value) < a.error


def test_accuracy_error():
    with pytest.raises(AccuracyError):
        ballot_dp(BallotQuery(64, 1.0, 0.0, 1.0), mesh=0.3, tol=1e-12)


def test_ballot_bounds():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        lo, up = ballot_bounds(BallotQuery(100, 1.0, 0.0, 1.0), c=1.0)
        assert up == pytest.approx(0.004)
        assert lo == pytest.approx(0.001)
        _, up2 = ballot_bounds(BallotQuery(200, 1.0, 0.0, 1.0), c=1.0)
    assert up2 / up == pytest.approx(2**-1.5)
    with pytest.warns(RegimeWarning):
        ballot_bounds(BallotQuery(100, 1.0, 0.5, 1.0))


def test_ballot_sandwich_calibration():
    # smallest c with lower(c) <= P <= upper(c) at every n
    c_star = 0.0
    for n in (64, 128, 256, 512):
        q = BallotQuery(n, 1.0, 0.0, 1.0)
        p = ballot_dp(q).value
        n32 = n**1.5
        c_star = max(c_star, 1 / (p * n32), p * n32 / 4)
    assert c_star <= 10
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for n in (64, 128, 256, 512):
            q = BallotQuery(n, 1.0, 0.0, 1.0)
            lo, up = ballot_bounds(q, c_star)
            assert lo <= ballot_dp(q).value * (1 + 1e-12) and ballot_dp(q).value <= up * (1 + 1e-12)


def test_constant_ceiling_equals_ballot():
    q = BallotQuery(50, 1.0, 0.0, 0.5)
    spec = BarrierSpec(0, np.full(50, 1.0), (0.0, 0.5))
    assert barrier_walk_prob(spec).value == pytest.approx(ballot_dp(q).value, abs=1e-9)
    lin = BarrierSpec.linear(3, 53, 0.0, 1.0, (0.0, 0.5))
    assert barrier_walk_prob(lin).value == pytest.approx(ballot_dp(q).value, abs=1e-9)


def test_set_a_lower_bound():
    for n in (64, 128, 256, 512):
        spec = BarrierSpec(0, np.full(n, 1.0), (0.0, 0.5))
        assert barrier_walk_prob(spec).value * n**1.5 >= 1 / 10


def test_infinite_ceiling():
    n, d = 40, 0.7
    spec = BarrierSpec(0, np.full(n, np.inf), (0.0, d))
    want = ndtr(d / (SD * math.sqrt(n))) - 0.5
    assert barrier_walk_prob(spec).value == pytest.approx(want, abs=1e-7)


def test_partial_ceiling_dp_vs_mc():
    spec = BarrierSpec.linear(0, 24, 0.3, 0.5, (1.0, 3.0), first=6)
    assert np.all(np.isinf(spec.ceilings[:5]))
    dp = barrier_walk_prob(spec)
    mc = barrier_walk_prob(spec, method="mc", paths=4 * 10**5, seed=1)
    assert abs(dp.value - mc.value) <= 3 * mc.error + dp.error


def test_barrier_spec_validation():
    with pytest.raises(ValueError):
        BarrierSpec(0, [], (0, 1))
    with pytest.raises(ValueError):
        BarrierSpec(0, [1.0], (1, 1))
    with pytest.raises(ValueError):
        BarrierSpec(0, [np.nan], (0, 1))
    with pytest.raises(ValueError):
        barrier_walk_prob(BarrierSpec(0, [1.0, 1.0], (0, 1)), steps=3)
    with pytest.raises(ValueError):
        barrier_walk_prob(BarrierSpec(0, [1.0], (0, 1)), method="exact")
