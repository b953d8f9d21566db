"""Gaussian surrogates: branching random walk maxima, ballot probabilities and
barrier events for Gaussian random walks.

BRW convention: a tree of depth n has 2^n leaves and a root edge above the
root, so a leaf value is a sum of n + 1 independent N(mean, variance) edges
and depth 0 is a single Gaussian.

Edge draws use heap order (root edge 0, the 2^l edges of level l at
2^l - 1 .. 2^{l+1} - 2) in stream STREAM_BRW of :mod:`randzeta.rng`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import signal
from scipy.special import ndtr, ndtri

from .analytic import SIGMA_SQ, RegimeWarning
from .rng import STREAM_BRW, STREAM_BRW_TAIL, STREAM_IID, STREAM_WALK, CounterRNG

MAX_BRW_DEPTH = 24
PATH_BLOCK = 4096


class AccuracyError(RuntimeError):
    """Discretization error estimate exceeds the requested tolerance."""


class Estimate(NamedTuple):
    value: float
    error: float  # standard error (mc) or error estimate (dp)
    method: str


# ---------------------------------------------------------------------------
# branching random walk


@dataclass(frozen=True)
class BrwParams:
    depth: int
    mean: float = 0.0
    variance: float = SIGMA_SQ
    # levels below depth - tail_depth are replaced by exact draws of the
    # subtree maximum (inverse CDF of the tabulated law); 0 = plain tree
    tail_depth: int = 0

    def __post_init__(self):
        if not 0 <= self.depth <= MAX_BRW_DEPTH:
            raise ValueError(f"depth={self.depth} outside [0, {MAX_BRW_DEPTH}]")
        if self.variance <= 0:
            raise ValueError("variance must be > 0")
        if not 0 <= self.tail_depth <= self.depth:
            raise ValueError("tail_depth must lie in [0, depth]")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def _brw_top(params: BrwParams, rng: CounterRNG, replicate: int, levels: int) -> np.ndarray:
    """Leaf values of the first ``levels`` levels (root edge included)."""
    z = rng.normal(replicate, 0, 2 ** (levels + 1) - 1)
    vals = params.mean + params.sd * z[:1]
    for lev in range(1, levels + 1):
        edges = params.mean + params.sd * z[2**lev - 1 : 2 ** (lev + 1) - 1]
        vals = np.repeat(vals, 2) + edges
    return vals


@dataclass
class MaxLaw:
    """Tabulated CDF of a subtree maximum, with inverse-CDF sampling."""

    x: np.ndarray
    cdf: np.ndarray
    _q: np.ndarray = field(init=False, repr=False)
    _xq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        keep = np.concatenate([[True], np.diff(self.cdf) > 0])
        self._q, self._xq = self.cdf[keep], self.x[keep]

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self._q, self._xq)

    def median(self) -> float:
        return float(self.ppf(np.array([0.5]))[0])


def _gauss_kernel(dx: float, sd: float, shift: float = 0.0, width: float = 9.0) -> np.ndarray:
    """Cell probabilities of N(shift, sd^2) on cells of size dx centred at m dx."""
    half = int(math.ceil((width * sd + abs(shift)) / dx))
    m = np.arange(-half, half + 1)
    return np.diff(ndtr((np.concatenate([m - 0.5, [half + 0.5]]) * dx - shift) / sd))


def brw_max_law(
    depth: int,
    mean: float = 0.0,
    variance: float = SIGMA_SQ,
    root_edge: bool = True,
    dx: float = 0.004,
) -> MaxLaw:
    """CDF of the BRW maximum by the distributional recursion.

    With G_d the CDF of the max over a depth-d subtree (no edge above it),
    G_0 = step at 0 and G_{d+1}(x) = (E G_d(x - Y))^2; the root edge adds one
    more convolution. Convolutions run on a grid of spacing ``dx``.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    sd = math.sqrt(variance)
    steps = depth + (1 if root_edge else 0)
    lo = mean * steps - 12.0 * sd * math.sqrt(steps + 1)
    hi = mean * steps + (math.sqrt(2 * math.log(2)) * sd + 0.2) * depth + 12.0 * sd
    # grid contains 0 so the depth-0 step sits on a node
    x = dx * np.arange(math.floor(lo / dx), math.ceil(hi / dx) + 1)
    kern = _gauss_kernel(dx, sd, shift=mean)
    half = (len(kern) - 1) // 2

    def smooth(G):
        padded = np.concatenate([np.zeros(half), G, np.ones(half)])
        # E G(x - Y) = sum_m G(x - m dx) P(Y in cell m)
        return np.clip(signal.fftconvolve(padded, kern, mode="valid"), 0.0, 1.0)

    if depth == 0:
        G = (x >= 0).astype(float)
    else:
        # depth 1 in closed form, then the recursion
        G = ndtr((x - mean) / sd) ** 2
        for _ in range(depth - 1):
            G = smooth(G) ** 2
    if root_edge and depth == 0:
        G = ndtr((x - mean) / sd)
    elif root_edge:
        G = smooth(G)
    return MaxLaw(x, np.maximum.accumulate(G))


def _tail_law(params: BrwParams) -> MaxLaw:
    return _cached_tail_law(params.tail_depth, params.mean, params.variance)


_TAIL_CACHE: dict = {}


def _cached_tail_law(t: int, mean: float, variance: float) -> MaxLaw:
    key = (t, mean, variance)
    if key not in _TAIL_CACHE:
        _TAIL_CACHE[key] = brw_max_law(t, mean, variance, root_edge=False)
    return _TAIL_CACHE[key]


def sample_brw_max(params: BrwParams, seed: int, replicate):
    """Maximum over the 2^depth leaves; float, or array for a replicate sequence.

    With ``tail_depth = t > 0`` the top depth - t levels are simulated and
    each of their 2^(depth-t) subtrees contributes an exact draw from the
    law of its maximum (uniform j of stream STREAM_BRW_TAIL).
    """
    reps = [int(replicate)] if np.ndim(replicate) == 0 else [int(r) for r in replicate]
    rng = CounterRNG(seed, STREAM_BRW)
    top_levels = params.depth - params.tail_depth
    if params.tail_depth:
        law = _tail_law(params)
        tail_rng = CounterRNG(seed, STREAM_BRW_TAIL)
    out = np.empty(len(reps))
    for i, r in enumerate(reps):
        vals = _brw_top(params, rng, r, top_levels)
        if params.tail_depth:
            vals = vals + law.ppf(tail_rng.uniform(r, 0, len(vals)))
        out[i] = vals.max()
    return float(out[0]) if np.ndim(replicate) == 0 else out


def sample_iid_max(n: int, seed: int, replicate, variance: float = SIGMA_SQ):
    """Maximum of 2^n independent N(0, n variance): sd sqrt(n) Phi^{-1}(U^{2^-n})."""
    reps = np.atleast_1d(np.asarray(replicate, dtype=np.int64))
    rng = CounterRNG(seed, STREAM_IID)
    u = np.array([rng.uniform(int(r), 0, 1)[0] for r in reps])
    # Phi^{-1}(U^(1/N)) = -Phi^{-1}(1 - U^(1/N)) keeps precision near 1
    m = -math.sqrt(n * variance) * ndtri(-np.expm1(np.log(u) / 2.0**n))
    return float(m[0]) if np.ndim(replicate) == 0 else m


class MaxFit(NamedTuple):
    alpha: float
    beta: float
    gamma: float


def fit_max_law(depths: Sequence[int], medians: Sequence[float]) -> MaxFit:
    """Least squares for median(n) = alpha n - beta log n + gamma."""
    n = np.asarray(depths, dtype=float)
    A = np.column_stack([n, -np.log(n), np.ones_like(n)])
    coef, *_ = np.linalg.lstsq(A, np.asarray(medians, dtype=float), rcond=None)
    return MaxFit(*map(float, coef))


@dataclass
class SweepResult:
    depths: list
    medians: np.ndarray
    fit: MaxFit
    fit_se: MaxFit
    samples: np.ndarray = field(repr=False)  # (len(depths), replicates)


def _sweep(depths, samples, bootstrap, seed) -> SweepResult:
    medians = np.median(samples, axis=1)
    fit = fit_max_law(depths, medians)
    rng = np.random.default_rng(seed)
    boots = []
    R = samples.shape[1]
    for _ in range(bootstrap):
        # resample replicate indices jointly, keeping any pairing across depths
        idx = rng.integers(0, R, R)
        boots.append(fit_max_law(depths, np.median(samples[:, idx], axis=1)))
    se = MaxFit(*np.std(np.array(boots), axis=0, ddof=1)) if bootstrap > 1 else MaxFit(*[math.nan] * 3)
    return SweepResult(list(depths), medians, fit, se, samples)


def brw_sweep(
    depths: Sequence[int],
    replicates: int,
    seed: int,
    top_levels: int | None = None,
    variance: float = SIGMA_SQ,
    bootstrap: int = 200,
) -> SweepResult:
    """Median BRW maximum across depths and the (alpha, beta, gamma) fit.

    ``top_levels=None`` simulates full trees. Otherwise each depth simulates
    ``top_levels`` levels and draws subtree maxima exactly; replicate i then
    reuses the same top-tree draws and tail uniforms at every depth (common
    random numbers), which sharpens the fitted slope without biasing any
    single depth.
    """
    rows = []
    for n in depths:
        tail = 0 if top_levels is None else max(n - top_levels, 0)
        params = BrwParams(n, variance=variance, tail_depth=tail)
        rows.append(sample_brw_max(params, seed, range(replicates)))
    return _sweep(depths, np.array(rows), bootstrap, seed)


def iid_sweep(
    depths: Sequence[int], replicates: int, seed: int, variance: float = SIGMA_SQ, bootstrap: int = 200
) -> SweepResult:
    rows = [sample_iid_max(n, seed, range(replicates), variance) for n in depths]
    return _sweep(depths, np.array(rows), bootstrap, seed)


def brw_exceedances(
    params: BrwParams, m: float, slope: float, intercept: float, seed: int, replicate: int
) -> tuple[int, int, float]:
    """(Z, Z_tilde, max) for one full tree.

    Z counts leaves >= m. Z_tilde also requires the partial sum after level
    k (k = 0..depth, level 0 = root edge) to stay below k slope + intercept.
    """
    if params.tail_depth:
        raise ValueError("barrier counts need the full tree (tail_depth = 0)")
    rng = CounterRNG(seed, STREAM_BRW)
    z = rng.normal(replicate, 0, 2 ** (params.depth + 1) - 1)
    vals = params.mean + params.sd * z[:1]
    alive = vals < intercept
    for lev in range(1, params.depth + 1):
        edges = params.mean + params.sd * z[2**lev - 1 : 2 ** (lev + 1) - 1]
        vals = np.repeat(vals, 2) + edges
        alive = np.repeat(alive, 2) & (vals < lev * slope + intercept)
    hit = vals >= m
    return int(hit.sum()), int((hit & alive).sum()), float(vals.max())


# ---------------------------------------------------------------------------
# ballot and barrier events


@dataclass(frozen=True)
class BallotQuery:
    n: int
    a: float
    b: float
    delta: float
    variance: float = SIGMA_SQ

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.variance <= 0:
            raise ValueError("variance must be > 0")

    def barrier(self) -> "BarrierSpec":
        return BarrierSpec(0, np.full(self.n, float(self.a)), (self.b, self.b + self.delta))


@dataclass(frozen=True, eq=False)
class BarrierSpec:
    """Walk S_0 = 0; S_k <= ceilings[k-1] for k = 1..steps; S_steps in window.

    ``start`` is the scale the walk starts from (bookkeeping only); ceiling
    entries may be +inf.
    """

    start: int
    ceilings: np.ndarray
    window: tuple[float, float]

    def __post_init__(self):
        c = np.asarray(self.ceilings, dtype=float)
        if c.ndim != 1 or len(c) < 1:
            raise ValueError("need at least one ceiling")
        if np.any(np.isnan(c)) or np.any(c == -np.inf):
            raise ValueError("ceilings must be real or +inf")
        lo, hi = self.window
        if not lo < hi:
            raise ValueError(f"terminal window ({lo}, {hi}) is empty")
        object.__setattr__(self, "ceilings", c)

    @property
    def steps(self) -> int:
        return len(self.ceilings)

    @classmethod
    def linear(
        cls,
        start: int,
        end: int,
        slope: float,
        intercept: float,
        window,
        first: int | None = None,
        origin: int | None = None,
    ):
        """Ceiling (k - origin) slope + intercept at scales k = start+1..end.

        ``origin`` defaults to ``start``; scales below ``first`` carry no ceiling.
        """
        k = np.arange(start + 1, end + 1)
        c = (k - (start if origin is None else origin)) * slope + intercept
        if first is not None:
            c = np.where(k >= first, c, np.inf)
        return cls(start, c, tuple(window))


def _dp_once(spec: BarrierSpec, sd: float, h: float, range_factor: float) -> float:
    n = spec.steps
    c = spec.ceilings
    lo_w, hi_w = spec.window
    hi_w = min(hi_w, c[-1])
    if hi_w <= lo_w:
        return 0.0
    # work in T_k = S_k - l_k with l_k the ceiling (carried over where it is
    # infinite) so the killing boundary is always the cell edge T = 0
    ell = np.empty(n)
    last = 0.0
    for k in range(n):
        if np.isfinite(c[k]):
            last = c[k]
        ell[k] = last
    spread = range_factor * sd * math.sqrt(n)
    below = spread + max(ell.max(), 0.0)
    above = 0.0 if np.all(np.isfinite(c[:-1])) else spread - min(ell.min(), 0.0)
    m_lo = int(math.ceil(below / h))
    m_hi = int(math.ceil(above / h))
    edges = h * np.arange(-m_lo, m_hi + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])

    def kill(mass, k):
        if np.isfinite(c[k]):
            mass[centers > 0] = 0.0
        return mass

    if n == 1:
        return float(ndtr(hi_w / sd) - ndtr(lo_w / sd))
    # step 1 is exact from S_0 = 0
    mass = np.diff(ndtr((edges + ell[0]) / sd))
    mass = kill(mass, 0)
    for k in range(1, n - 1):
        d = ell[k] - ell[k - 1]
        kern = _gauss_kernel(h, sd, shift=-d, width=range_factor + 1)
        half = (len(kern) - 1) // 2
        mass = signal.fftconvolve(mass, kern, mode="full")[half : half + len(centers)]
        mass = kill(np.clip(mass, 0.0, None), k)
    # last step: exact window integral from each cell centre
    d = ell[n - 1] - ell[n - 2]
    A, B = lo_w - ell[n - 1], hi_w - ell[n - 1]
    p = ndtr((B + d - centers) / sd) - ndtr((A + d - centers) / sd)
    return float(math.fsum(mass * p))


def barrier_walk_prob(
    spec: BarrierSpec,
    variance: float = SIGMA_SQ,
    method: str = "dp",
    steps: int | None = None,
    mesh: float = 0.02,
    range_factor: float = 8.0,
    tol: float | None = None,
    paths: int = 10**6,
    seed: int = 0,
) -> Estimate:
    """P(mean-zero Gaussian walk respects the ceilings and ends in the window).

    ``dp``: cell dynamic programme at meshes h and h/2 combined by Richardson
    extrapolation (second-order scheme); the error estimate is the Richardson
    correction plus the truncated Gaussian tail mass. ``mc``: plain Monte Carlo.
    """
    if steps is not None and steps != spec.steps:
        raise ValueError(f"steps={steps} but the spec has {spec.steps} ceilings")
    if variance <= 0:
        raise ValueError("variance must be > 0")
    sd = math.sqrt(variance)
    if method == "mc":
        return _barrier_mc(spec, sd, paths, seed)
    if method != "dp":
        raise ValueError(f"method must be 'dp' or 'mc', got {method!r}")
    if mesh <= 0:
        raise ValueError("mesh must be > 0")
    coarse = _dp_once(spec, sd, mesh, range_factor)
    fine = _dp_once(spec, sd, mesh / 2, range_factor)
    value = fine + (fine - coarse) / 3.0
    err = abs(fine - coarse) / 3.0 + spec.steps * ndtr(-range_factor)
    if tol is not None and err > tol:
        raise AccuracyError(f"mesh={mesh}: estimated error {err:.3g} exceeds tol={tol:.3g}")
    return Estimate(max(value, 0.0), float(err), "dp")


def _barrier_mc(spec: BarrierSpec, sd: float, paths: int, seed: int) -> Estimate:
    # path i uses block i // PATH_BLOCK of stream STREAM_WALK
    n = spec.steps
    rng = CounterRNG(seed, STREAM_WALK)
    lo_w, hi_w = spec.window
    hits = 0
    for blk in range(-(-paths // PATH_BLOCK)):
        m = min(PATH_BLOCK, paths - blk * PATH_BLOCK)
        s = np.cumsum(sd * rng.normal(blk, 0, m * n).reshape(m, n), axis=1)
        ok = np.all(s <= spec.ceilings, axis=1) & (s[:, -1] > lo_w) & (s[:, -1] < hi_w)
        hits += int(ok.sum())
    p = hits / paths
    return Estimate(p, math.sqrt(p * (1 - p) / paths), "mc")


def ballot_dp(query: BallotQuery, mesh: float = 0.02, range_factor: float = 8.0, tol: float | None = None) -> Estimate:
    """P(S_k <= a for k <= n, S_n in (b, b + delta)) by dynamic programming."""
    if query.b >= query.a:
        return Estimate(0.0, 0.0, "dp")
    return barrier_walk_prob(query.barrier(), query.variance, "dp", mesh=mesh, range_factor=range_factor, tol=tol)


def ballot_mc(query: BallotQuery, paths: int = 10**6, seed: int = 0) -> Estimate:
    return barrier_walk_prob(query.barrier(), query.variance, "mc", paths=paths, seed=seed)


def ballot_bounds(query: BallotQuery, c: float = 1.0) -> tuple[float, float]:
    """(1 / (c n^{3/2}), c (1+a)(1+a-b) / n^{3/2})."""
    a, b, d, n = query.a, query.b, query.delta, query.n
    if b > a - d:
        warnings.warn(f"upper bound needs b <= a - delta (b={b}, a={a}, delta={d})", RegimeWarning, stacklevel=2)
    if not (d < 1 and b == 0 and a == 1):
        warnings.warn("lower bound is stated for a = 1, window (0, delta), delta < 1", RegimeWarning, stacklevel=2)
    n32 = n**1.5
    return 1.0 / (c * n32), c * (1 + a) * (1 + a - b) / n32
