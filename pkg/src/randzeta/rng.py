"""Counter-based random numbers.

Draw ``j`` of stream ``s`` for replicate ``r`` under master seed ``S`` is a
pure function of ``(S, s, r, j)``: numpy's Philox keyed by ``(S, s)`` with
counter ``(j // 4, r, 0, 0)``. Nothing depends on how draws are batched or
on which worker asks for them.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# stream ids; tilt rejection round t uses STREAM_TILT + t
STREAM_PHASE = 0
STREAM_TILT = 1 << 16
STREAM_BRW = 2 << 16
STREAM_BRW_TAIL = 3 << 16
STREAM_IID = 4 << 16
STREAM_WALK = 5 << 16

_U64 = 1 << 64
_TWO_M53 = 2.0**-53


def _check_u64(x: int, name: str) -> int:
    x = int(x)
    if not 0 <= x < _U64:
        raise ValueError(f"{name}={x} must be in [0, 2**64)")
    return x


class CounterRNG:
    """Random access into one (seed, stream) pair."""

    def __init__(self, seed: int, stream: int = STREAM_PHASE):
        self.seed = _check_u64(seed, "seed")
        self.stream = _check_u64(stream, "stream")
        self._bg = np.random.Philox(key=self.seed | (self.stream << 64), counter=[0, 0, 0, 0])
        self._state = self._bg.state

    def raw(self, replicate: int, start: int, stop: int) -> np.ndarray:
        """Raw uint64 draws ``start .. stop-1`` of a replicate."""
        if stop < start or start < 0:
            raise ValueError(f"bad draw range [{start}, {stop})")
        st = self._state
        st["state"]["counter"][:] = (start // 4, replicate, 0, 0)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        self._bg.state = st
        off = start % 4
        return self._bg.random_raw(stop - start + off)[off:]

    def uniform(self, replicate: int, start: int, stop: int) -> np.ndarray:
        """Uniforms on the open interval (0, 1), 53-bit resolution."""
        return to_uniform(self.raw(replicate, start, stop))

    def normal(self, replicate: int, start: int, stop: int) -> np.ndarray:
        """Standard normals by inverse CDF, one uniform each."""
        return ndtri(self.uniform(replicate, start, stop))


def to_uniform(raw: np.ndarray) -> np.ndarray:
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
