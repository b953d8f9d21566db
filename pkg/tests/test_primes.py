import math

import numpy as np
import pytest
from fractions import Fraction

from randzeta.primes import (
    CapacityError,
    load_cache,
    mertens_sum,
    prime_count_estimate,
    primes_in_scale,
    save_cache,
    sieve,
    weighted_prime_sum,
)


def trial_division_primes(n):
    return [p for p in range(2, n + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]


def test_sieve_matches_trial_division():
    t = sieve(9.0)
    assert t.primes.tolist() == trial_division_primes(int(math.exp(9.0)))


def test_sieve_small_limits():
    t = sieve(4.0)
    assert len(t) == 16
    assert t.primes[-1] == 53
    assert sieve(1.0).primes.tolist() == [2]


def test_segment_size_does_not_matter():
    a = sieve(10.0)
    b = sieve(10.0, segment_size=97)
    assert np.array_equal(a.primes, b.primes)


def test_scales():
    t = sieve(4.0)
    assert primes_in_scale(t, 0).tolist() == [2]
    assert primes_in_scale(t, 1).tolist() == [3, 5, 7]
    assert primes_in_scale(t, 2).tolist() == [11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]
    assert t.max_scale == 2
    with pytest.raises(CapacityError):
        t.scale_slice(3)


def test_scale_boundaries_by_log():
    t = sieve(16.0)
    k = t.scale_of()
    lp = t.log_p
    assert np.all(lp[k == 0] <= 1.0)
    for s in range(1, 5):
        sel = lp[k == s]
        assert np.all(sel > 2.0 ** (s - 1)) and np.all(sel <= 2.0**s)
    assert t.max_scale == 4 and len(t) == 595341


def test_scales_slice_sentinel():
    t = sieve(8.0)
    assert t.scales_slice(-1, 3) == slice(0, len(t))
    assert t.scales_slice(2, 2) == slice(0, 0)
    assert t.scales_slice(0, 1) == t.scale_slice(1)


def test_capacity_errors():
    with pytest.raises(CapacityError):
        sieve(21.0)
    with pytest.raises(CapacityError):
        sieve(0.5)
    t = sieve(4.0)
    with pytest.raises(CapacityError):
        mertens_sum(t, 2, 60)


def test_mertens_small_exact():
    t = sieve(4.0)
    # primes in (e, e^2] are 3, 5, 7
    want = Fraction(1, 3) + Fraction(1, 5) + Fraction(1, 7)
    assert mertens_sum(t, math.e, math.e**2) == pytest.approx(float(want), abs=1e-15)


def test_mertens_additivity():
    t = sieve(12.0)
    a = mertens_sum(t, 2, 1000)
    b = mertens_sum(t, 1000, 100000)
    assert mertens_sum(t, 2, 100000) == pytest.approx(a + b, abs=1e-13)


def test_mertens_dyadic_scale_near_log2():
    t = sieve(16.0)
    assert abs(mertens_sum(t, math.exp(8), math.exp(16)) - math.log(2)) < 0.02


def test_weighted_sum():
    t = sieve(4.0)
    v, c = weighted_prime_sum(t, math.e, math.e**2, 1)
    want = sum(math.log(p) / p for p in (3, 5, 7))
    assert v == pytest.approx(want, abs=1e-14)
    assert c == pytest.approx(want / 2.0)
    v0, c0 = weighted_prime_sum(t, math.e, math.e**2, 0)
    assert v0 == c0


def test_prime_count_estimate():
    from scipy.special import expi

    for x in (1e3, 1e5, math.exp(16)):
        assert prime_count_estimate(x) == pytest.approx(expi(math.log(x)) - expi(math.log(2)), rel=1e-9)
    assert abs(prime_count_estimate(math.exp(4)) - 16) <= 4
    assert abs(prime_count_estimate(math.exp(16)) - 595341) / 595341 < 0.001


def test_cache_roundtrip(tmp_path):
    t = sieve(10.0)
    f = tmp_path / "p.bin"
    save_cache(t, f)
    raw = f.read_bytes()
    assert raw[:4] == b"PRIM"
    assert int.from_bytes(raw[8:16], "little") == len(t)
    u = load_cache(f, t.limit)
    assert np.array_equal(u.primes, t.primes)
    assert np.array_equal(u.scale_offsets, t.scale_offsets)
    assert u.fingerprint() == t.fingerprint()


def test_cache_rejects_garbage(tmp_path):
    f = tmp_path / "bad.bin"
    f.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        load_cache(f)
