"""Random phases and the field built from them.

The field is X_n(h) = sum over p <= exp(2**n) of p^{-1/2} cos(theta_p - h log p)
with independent uniform angles theta_p. Its scale-k increment Y_k(h) keeps
the primes with 2^{k-1} < log p <= 2^k.

Angles come from :mod:`randzeta.rng`, so prime ``j`` of replicate ``r`` always
gets the same angle whatever else is sampled alongside it. A
:class:`PhaseAssignment` holds either one replicate (angles of shape ``(P,)``)
or a batch (``(R, P)``); the evaluators accept both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytic import EXACT_MAX_SCALE
from .primes import CapacityError, PrimeTable
from .rng import STREAM_PHASE, STREAM_TILT, CounterRNG, to_uniform

TWO_PI = 2.0 * math.pi
KAPPA_UNIFORM = 1e-6
MAX_TILT_ROUNDS = 200
ANCHOR_EVERY = 64


@dataclass(frozen=True, eq=False)
class PhaseAssignment:
    angles: np.ndarray = field(repr=False)
    measure: tuple
    seed: int
    replicate: int | tuple
    fingerprint: str

    @property
    def n_primes(self) -> int:
        return self.angles.shape[-1]

    @property
    def batched(self) -> bool:
        return self.angles.ndim == 2

    def sidecar(self) -> dict:
        return {
            "seed": self.seed,
            "measure": list(self.measure),
            "table_fingerprint": self.fingerprint,
            "n_primes": self.n_primes,
        }


@dataclass(frozen=True)
class FieldParams:
    n: int
    r: int = 0
    g: int | None = None

    def __post_init__(self):
        if not 0 <= self.r < self.n:
            raise ValueError(f"need 0 <= r < n, got r={self.r}, n={self.n}")
        if self.n > EXACT_MAX_SCALE:
            raise CapacityError(f"n={self.n} beyond exact prime capacity {EXACT_MAX_SCALE}")
        if self.grid_exp < 0:
            raise ValueError("grid exponent must be >= 0")

    @property
    def grid_exp(self) -> int:
        return self.n if self.g is None else self.g


def dyadic_grid(g: int, interval: tuple[float, float] = (0.0, 1.0), closed: bool = False) -> np.ndarray:
    """Points j 2^-g inside ``interval`` (right end included when ``closed``)."""
    if g < 0:
        raise ValueError("g must be >= 0")
    lo, hi = interval
    step = 2.0**-g
    j0 = math.ceil(lo / step)
    j1 = math.floor(hi / step) if closed else math.ceil(hi / step) - 1
    return np.arange(j0, j1 + 1, dtype=np.float64) * step


# ---------------------------------------------------------------------------
# sampling


def _prime_count(table: PrimeTable, k_max: int | None) -> int:
    if k_max is None:
        return len(table)
    return table.scales_slice(-1, k_max).stop


def _replicates(replicate) -> tuple[list[int], bool]:
    if np.ndim(replicate) == 0:
        return [int(replicate)], False
    return [int(r) for r in replicate], True


def _finish(angles, table, measure, seed, replicate, batched):
    out = np.vstack(angles) if batched else angles[0]
    out.setflags(write=False)
    rep = tuple(replicate) if batched else int(replicate)
    return PhaseAssignment(out, measure, int(seed), rep, table.fingerprint())


def sample_phases(
    table: PrimeTable, seed: int, replicate, k_max: int | None = None
) -> PhaseAssignment:
    """Uniform angles for the primes of scales 0..k_max (all primes by default).

    ``replicate`` may be an int or a sequence of ints (batched result).
    """
    reps, batched = _replicates(replicate)
    P = _prime_count(table, k_max)
    rng = CounterRNG(seed, STREAM_PHASE)
    angles = [TWO_PI * rng.uniform(r, 0, P) for r in reps]
    return _finish(angles, table, ("base",), seed, replicate, batched)


def _best_fisher(kappa: np.ndarray, rngs: list, replicate: int, j0: int) -> np.ndarray:
    """Von Mises offsets (mean 0) for primes j0..j0+len(kappa)-1.

    Rejection round t reads uniforms 3j..3j+2 of stream STREAM_TILT + t, so
    each prime's result depends only on its own index.
    """
    m = len(kappa)
    # b = (tau - sqrt(2 tau)) / (2 kappa) rewritten without cancellation
    s = np.sqrt(1.0 + 4.0 * kappa * kappa)
    a = 1.0 + s
    b = 2.0 * kappa * a / ((s + 1.0) * (a + np.sqrt(2.0 * a)))
    rr = (1.0 + b * b) / (2.0 * b)
    out = np.empty(m)
    pending = np.arange(m)
    for t in range(MAX_TILT_ROUNDS):
        if t == len(rngs):
            rngs.append(CounterRNG(rngs[0].seed, STREAM_TILT + t))
        lo, hi = int(pending[0]), int(pending[-1]) + 1
        u = rngs[t].uniform(replicate, 3 * (j0 + lo), 3 * (j0 + hi)).reshape(-1, 3)[pending - lo]
        z = np.cos(math.pi * u[:, 0])
        rp, kp = rr[pending], kappa[pending]
        fz = (1.0 + rp * z) / (rp + z)
        c = kp * (rp - fz)
        ok = (c * (2.0 - c) - u[:, 1] > 0) | (np.log(c / u[:, 1]) + 1.0 - c >= 0)
        acc = pending[ok]
        out[acc] = np.sign(u[ok, 2] - 0.5) * np.arccos(np.clip(fz[ok], -1.0, 1.0))
        pending = pending[~ok]
        if len(pending) == 0:
            return out
    raise RuntimeError("von Mises rejection did not terminate")


def _tilted(table, seed, replicate, k_max, kappa_fn, measure):
    reps, batched = _replicates(replicate)
    if k_max < 1:
        raise ValueError("tilt needs k_max >= 1")
    P = _prime_count(table, k_max)
    # scale 0 (p = 2) keeps its base angle
    s = table.scales_slice(0, k_max)
    kappa, mu = kappa_fn(table.inv_sqrt_p[s], table.log_p[s])
    active = np.flatnonzero(kappa >= KAPPA_UNIFORM)
    base = CounterRNG(seed, STREAM_PHASE)
    tilt_rngs = [CounterRNG(seed, STREAM_TILT)]
    angles = []
    for r in reps:
        th = TWO_PI * base.uniform(r, 0, P)
        if len(active):
            off = _best_fisher(kappa[active], tilt_rngs, r, s.start + int(active[0]))
            th[s.start + active] = np.mod(mu[active] + off, TWO_PI)
        angles.append(th)
    return _finish(angles, table, measure, seed, replicate, batched)


def sample_phases_tilted_one(
    table: PrimeTable, lam: float, h: float, k_max: int, seed: int, replicate
) -> PhaseAssignment:
    """Angles under the tilt exp(lam Y_k(h)) for every scale k = 1..k_max.

    Per prime the density is proportional to exp(kappa cos(theta - h log p))
    with kappa = lam / sqrt(p): a von Mises law, sampled exactly.
    """
    if lam < 0:
        raise ValueError(f"lambda={lam} must be >= 0")

    def kappa_fn(w, logp):
        return lam * w, np.mod(h * logp, TWO_PI)

    return _tilted(table, seed, replicate, k_max, kappa_fn, ("tilted-one", float(lam), float(h)))


def sample_phases_tilted_two(
    table: PrimeTable,
    lams: Sequence[float],
    h1: float,
    h2: float,
    k_max: int,
    seed: int,
    replicate,
) -> PhaseAssignment:
    """Angles under exp(lam1 Y_k(h1) + lam2 Y_k(h2)), k = 1..k_max.

    The two cosines combine into a cos theta + b sin theta, i.e. one von Mises
    law with concentration hypot(a, b) and mean direction atan2(b, a).
    """
    l1, l2 = (float(x) for x in lams)
    if l1 < 0 or l2 < 0:
        raise ValueError("lambdas must be >= 0")

    def kappa_fn(w, logp):
        a = w * (l1 * np.cos(h1 * logp) + l2 * np.cos(h2 * logp))
        b = w * (l1 * np.sin(h1 * logp) + l2 * np.sin(h2 * logp))
        return np.hypot(a, b), np.mod(np.arctan2(b, a), TWO_PI)

    measure = ("tilted-two", l1, l2, float(h1), float(h2))
    return _tilted(table, seed, replicate, k_max, kappa_fn, measure)


# ---------------------------------------------------------------------------
# evaluation


def _check_capacity(phases: PhaseAssignment, table: PrimeTable, k_hi: int) -> slice:
    if k_hi > table.max_scale:
        raise CapacityError(f"scale {k_hi} beyond table capacity {table.max_scale}")
    s = table.scales_slice(-1, k_hi)
    if s.stop > phases.n_primes:
        raise CapacityError(f"phases cover {phases.n_primes} primes, scale {k_hi} needs {s.stop}")
    return s


def _terms(phases, table, s: slice, h: float) -> np.ndarray:
    return table.inv_sqrt_p[s] * np.cos(phases.angles[..., s] - h * table.log_p[s])


def _sum(terms: np.ndarray):
    if terms.ndim == 1:
        return math.fsum(terms)
    return terms.sum(axis=-1)


def eval_increments(phases: PhaseAssignment, table: PrimeTable, h: float, k_max: int):
    """(Y_0(h), ..., Y_kmax(h)); shape (k_max+1,) or (R, k_max+1)."""
    _check_capacity(phases, table, k_max)
    cols = [_sum(_terms(phases, table, table.scale_slice(k), h)) for k in range(k_max + 1)]
    return np.stack([np.asarray(c, dtype=float) for c in cols], axis=-1)


def eval_field(phases: PhaseAssignment, table: PrimeTable, h: float, k_lo: int, k_hi: int):
    """X_{k_lo,k_hi}(h): scales k_lo+1..k_hi; k_lo = -1 includes scale 0."""
    if k_hi < k_lo or k_lo < -1:
        raise ValueError(f"bad scale range ({k_lo}, {k_hi}]")
    if k_hi == k_lo:
        return 0.0 if not phases.batched else np.zeros(phases.angles.shape[0])
    _check_capacity(phases, table, k_hi)
    s = table.scales_slice(k_lo, k_hi)
    return _sum(_terms(phases, table, s, h))


def _direct(angles, w, logp, grid, chunk=4096):
    # cos(t - hL) = cos t cos hL + sin t sin hL, basis built once per chunk
    out = np.zeros(angles.shape[:-1] + (len(grid),))
    for i in range(0, len(w), chunk):
        sl = slice(i, i + chunk)
        arg = np.outer(logp[sl], grid)
        out += (w[sl] * np.cos(angles[..., sl])) @ np.cos(arg)
        out += (w[sl] * np.sin(angles[..., sl])) @ np.sin(arg)
    return out


def _recurrence(angles, w, logp, grid):
    # z_p(h + d) = z_p(h) exp(-i d log p); re-anchored from the angles every
    # ANCHOR_EVERY steps so rounding cannot accumulate
    d = grid[1] - grid[0] if len(grid) > 1 else 0.0
    if len(grid) > 2 and not np.allclose(np.diff(grid), d, rtol=0, atol=1e-15):
        raise ValueError("recurrence backend needs an evenly spaced grid")
    rot = np.exp(-1j * d * logp)
    out = np.empty(angles.shape[:-1] + (len(grid),))
    z = None
    for i, h in enumerate(grid):
        if i % ANCHOR_EVERY == 0:
            z = w * np.exp(1j * (angles - h * logp))
        else:
            z *= rot
        out[..., i] = z.real.sum(axis=-1)
    return out


def eval_field_grid(
    phases: PhaseAssignment,
    table: PrimeTable,
    grid: np.ndarray,
    k_lo: int,
    k_hi: int,
    backend: str = "auto",
) -> np.ndarray:
    """X_{k_lo,k_hi} at every grid point; shape (G,) or (R, G).

    ``backend``: "direct" (cosine basis and matrix products), "recurrence"
    (per-prime phase rotation), or "auto" (recurrence for a single replicate
    on a large table, direct otherwise).
    """
    if backend not in ("auto", "direct", "recurrence"):
        raise ValueError(f"unknown backend {backend!r}")
    grid = np.asarray(grid, dtype=np.float64)
    if k_hi == k_lo:
        return np.zeros(phases.angles.shape[:-1] + (len(grid),))
    _check_capacity(phases, table, k_hi)
    s = table.scales_slice(k_lo, k_hi)
    w, logp = table.inv_sqrt_p[s], table.log_p[s]
    angles = phases.angles[..., s]
    if backend == "auto":
        big = (s.stop - s.start) * len(grid) > 1 << 24
        backend = "recurrence" if (not phases.batched and big) else "direct"
    if backend == "direct":
        return _direct(angles, w, logp, grid)
    return _recurrence(angles, w, logp, grid)


def eval_increments_grid(
    phases: PhaseAssignment, table: PrimeTable, grid: np.ndarray, k_max: int, backend: str = "direct"
) -> np.ndarray:
    """Y_k at every grid point for k = 0..k_max; shape (..., k_max+1, G)."""
    cols = [eval_field_grid(phases, table, grid, k - 1, k, backend) for k in range(k_max + 1)]
    return np.stack(cols, axis=-2)
