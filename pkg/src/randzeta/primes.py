"""Prime tables, dyadic log-scales and the prime sums behind the covariances.

Scale ``k`` holds the primes with ``2**(k-1) < log p <= 2**k``; scale 0 is
``{2}``. Exact enumeration stops at ``log p <= 20``; past that the
integral backend in :mod:`randzeta.analytic` takes over.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate

MAX_LOG_LIMIT = 20.0
CACHE_MAGIC = b"PRIM"
CACHE_VERSION = 1


class CapacityError(ValueError):
    """Request exceeds what the exact prime backend can enumerate."""


@dataclass(frozen=True, eq=False)
class PrimeTable:
    limit: int
    primes: np.ndarray
    log_p: np.ndarray = field(repr=False)
    inv_sqrt_p: np.ndarray = field(repr=False)
    # scale_offsets[k]:scale_offsets[k+1] indexes the primes of scale k
    scale_offsets: np.ndarray = field(repr=False)

    @classmethod
    def from_primes(cls, primes: np.ndarray, limit: int) -> "PrimeTable":
        primes = np.ascontiguousarray(primes, dtype=np.int64)
        pf = primes.astype(np.float64)
        log_p = np.log(pf)
        inv_sqrt_p = 1.0 / np.sqrt(pf)
        for a in (primes, log_p, inv_sqrt_p):
            a.setflags(write=False)
        return cls(limit, primes, log_p, inv_sqrt_p, _scale_offsets(log_p, limit))

    def __len__(self) -> int:
        return len(self.primes)

    @property
    def max_scale(self) -> int:
        """Largest k whose scale is fully enumerated."""
        k = -1
        while 2.0 ** (k + 1) < math.log(self.limit + 1):
            k += 1
        return k

    def scale_slice(self, k: int) -> slice:
        if k < 0 or k > self.max_scale:
            raise CapacityError(
                f"scale k={k} needs primes up to exp(2**{k}); table holds "
                f"scales 0..{self.max_scale} (limit {self.limit})"
            )
        return slice(int(self.scale_offsets[k]), int(self.scale_offsets[k + 1]))

    def scales_slice(self, k_lo: int, k_hi: int) -> slice:
        """Primes of scales ``k_lo+1 .. k_hi``; ``k_lo=-1`` includes scale 0."""
        if k_hi < k_lo:
            raise ValueError(f"k_lo={k_lo} > k_hi={k_hi}")
        if k_lo < -1:
            raise ValueError(f"k_lo={k_lo} < -1")
        if k_hi == k_lo:
            return slice(0, 0)
        self.scale_slice(k_hi)
        return slice(int(self.scale_offsets[k_lo + 1]), int(self.scale_offsets[k_hi + 1]))

    def scale_of(self) -> np.ndarray:
        """Scale index of every prime in the table."""
        counts = np.diff(self.scale_offsets)
        return np.repeat(np.arange(len(counts)), counts)

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(self.primes.astype("<u8").tobytes()).hexdigest()[:16]


def _scale_offsets(log_p: np.ndarray, limit: int) -> np.ndarray:
    # scale k is complete when every prime <= exp(2**k) is present, i.e.
    # exp(2**k) < limit + 1; leftover primes form a trailing partial scale
    k_top = -1
    while 2.0 ** (k_top + 1) < math.log(limit + 1):
        k_top += 1
    bounds = 2.0 ** np.arange(-1, k_top + 1)
    offsets = np.searchsorted(log_p, bounds, side="right")
    if offsets[-1] < len(log_p):
        offsets = np.append(offsets, len(log_p))
    return np.asarray(offsets, dtype=np.int64)


def _simple_sieve(n: int) -> np.ndarray:
    is_p = np.ones(n + 1, dtype=bool)
    is_p[:2] = False
    for i in range(2, math.isqrt(n) + 1):
        if is_p[i]:
            is_p[i * i :: i] = False
    return np.flatnonzero(is_p)


def sieve(log_limit: float, segment_size: int = 1 << 20) -> PrimeTable:
    """Segmented sieve of Eratosthenes up to ``floor(exp(log_limit))``.

    Peak memory is one boolean segment plus the output. The result does not
    depend on ``segment_size``.
    """
    if not 1.0 <= log_limit <= MAX_LOG_LIMIT:
        raise CapacityError(
            f"log_limit={log_limit} outside [1, {MAX_LOG_LIMIT}]; exact enumeration "
            f"is capped at log p <= {MAX_LOG_LIMIT:g}"
        )
    if segment_size < 2:
        raise ValueError("segment_size must be >= 2")
    limit = int(math.floor(math.exp(log_limit)))
    base = _simple_sieve(math.isqrt(limit))
    chunks = []
    for lo in range(2, limit + 1, segment_size):
        hi = min(lo + segment_size, limit + 1)
        seg = np.ones(hi - lo, dtype=bool)
        for p in base:
            p = int(p)
            if p * p >= hi:
                break
            start = max(p * p, -(-lo // p) * p)
            seg[start - lo :: p] = False
        chunks.append(np.flatnonzero(seg) + lo)
    primes = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    return PrimeTable.from_primes(primes, limit)


@lru_cache(maxsize=8)
def table_for_depth(n: int) -> PrimeTable:
    """Cached table covering scales ``0..n`` (primes up to ``exp(2**n)``)."""
    if 2.0**n > MAX_LOG_LIMIT:
        raise CapacityError(f"depth n={n} needs log p up to {2**n} > {MAX_LOG_LIMIT:g}")
    return sieve(float(2**n))


def primes_in_scale(table: PrimeTable, k: int) -> np.ndarray:
    return table.primes[table.scale_slice(k)]


def _range_mask(table: PrimeTable, P: float, Q: float) -> slice:
    if P < 2 or Q < P:
        raise ValueError(f"need 2 <= P <= Q, got P={P}, Q={Q}")
    # no prime is missing while Q < limit + 1
    if Q >= table.limit + 1:
        raise CapacityError(f"Q={Q} exceeds table limit {table.limit}")
    lo = np.searchsorted(table.primes, P, side="right")
    hi = np.searchsorted(table.primes, Q, side="right")
    return slice(int(lo), int(hi))


def mertens_sum(table: PrimeTable, P: float, Q: float) -> float:
    """Sum of 1/p over primes in (P, Q]."""
    s = _range_mask(table, P, Q)
    return math.fsum(1.0 / table.primes[s].astype(np.float64))


def weighted_prime_sum(table: PrimeTable, P: float, Q: float, m: int) -> tuple[float, float]:
    """Sum of (log p)**m / p over primes in (P, Q].

    Returns ``(value, C)`` with ``C = value / (log Q)**m`` (``C = value`` for
    ``m = 0``), the constant in the O((log Q)**m) bound.
    """
    if not 0 <= m <= 4:
        raise ValueError("m must be in 0..4")
    s = _range_mask(table, P, Q)
    pf = table.primes[s].astype(np.float64)
    value = math.fsum(table.log_p[s] ** m / pf)
    scale = math.log(Q) ** m if m else 1.0
    return value, value / scale


def prime_count_estimate(x: float) -> float:
    """Logarithmic integral from 2 to x by adaptive quadrature in v = log u."""
    if x < 2:
        raise ValueError("x must be >= 2")
    a, b = math.log(2.0), math.log(x)
    if b == a:
        return 0.0
    # integrand e^v / v, rescaled by e^b to keep quad's abs tolerance meaningful
    val, _ = integrate.quad(
        lambda v: math.exp(v - b) / v, a, b, epsabs=0.0, epsrel=1e-12, limit=200
    )
    return val * math.exp(b)


def save_cache(table: PrimeTable, path: str | Path) -> None:
    """Binary cache: magic, u32 version, u64 count, u64 primes; little-endian."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IQ", CACHE_VERSION, len(table.primes)))
        fh.write(table.primes.astype("<u8").tobytes())


def load_cache(path: str | Path, limit: int | None = None) -> PrimeTable:
    """Inverse of :func:`save_cache`; logs and inverse roots are recomputed.

    ``limit`` defaults to the largest cached prime.
    """
    with open(path, "rb") as fh:
        if fh.read(4) != CACHE_MAGIC:
            raise ValueError(f"{path}: not a prime cache (bad magic)")
        version, count = struct.unpack("<IQ", fh.read(12))
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        primes = np.frombuffer(fh.read(8 * count), dtype="<u8")
        if len(primes) != count:
            raise ValueError(f"{path}: truncated ({len(primes)} of {count} primes)")
    primes = primes.astype(np.int64)
    if limit is None:
        limit = int(primes[-1]) if count else 1
    return PrimeTable.from_primes(primes, limit)
