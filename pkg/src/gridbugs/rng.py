"""Deterministic random number generation.

Two constructions, both built on the splitmix64 finalizer:

* ``RngState`` — a sequential 64-bit stream (state advances by the golden
  gamma, output is the mixed state).  Every stochastic subsystem owns its own
  stream, derived from the master seed and a subsystem tag, so enabling one
  feature never shifts the draws of another.
* ``cell_stream_draw`` — a counter-based keyed stream: a pure function of
  ``(seed, cell_id, step, substream)`` with no carried state.  Two parties
  that know the key compute identical values without communicating, which is
  what lets partition workers replicate food production on halo rows instead
  of shipping it.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# Salts for deriving independent substreams from one master seed.
STREAM_SCHEDULER = 1
STREAM_MOVEMENT = 2
STREAM_MORTALITY = 3
STREAM_REPRODUCTION = 4
STREAM_PREDATORS = 5
STREAM_INIT_BUGS = 6
STREAM_INIT_PREDATORS = 7
STREAM_INIT_SIZES = 8
STREAM_FOOD = 9  # counter-based only; never a sequential stream

_SUBSTREAM_SALT = 0xD1B54A32D192ED03
_RANK_SALT = 0x8BB84B93962EACC9


def mix64(z: int) -> int:
    """splitmix64 finalizer: a fixed bijective mix of a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngState:
    """Sequential splitmix64 stream with an explicit, checkpointable state."""

    __slots__ = ("state",)

    def __init__(self, state: int) -> None:
        self.state = state & _MASK64

    def clone(self) -> "RngState":
        return RngState(self.state)

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN_GAMMA) & _MASK64
        return mix64(self.state)

    def next_uniform(self, lo: float, hi: float) -> float:
        """Uniform draw in [lo, hi).  Always advances state exactly once.

        For lo == hi the bound value is returned (state still advances).
        """
        u = (self.next_u64() >> 11) * 2.0**-53
        v = lo + u * (hi - lo)
        if hi > lo and v >= hi:  # guard the open bound against rounding
            v = math.nextafter(hi, lo)
        return v

    def next_int(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi], bias-free."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        n = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return lo + (r % n)

    def shuffle(self, items) -> list:
        """Fisher-Yates permutation of ``items`` (len(items)-1 index draws)."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.next_int(0, i)
            out[i], out[j] = out[j], out[i]
        return out

    def next_gauss(self, mean: float, sd: float) -> float:
        """Normal draw via Box-Muller (two uniform draws, no caching)."""
        u1 = self.next_uniform(0.0, 1.0)
        u2 = self.next_uniform(0.0, 1.0)
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        return mean + sd * r * math.cos(2.0 * math.pi * u2)


def substream(seed: int, tag: int, rank: int = 0) -> RngState:
    """Derive the sequential stream for one subsystem of one worker."""
    s = mix64(seed ^ ((tag * _SUBSTREAM_SALT) & _MASK64))
    s = mix64(s ^ ((rank * _RANK_SALT) & _MASK64))
    return RngState(s)


# ── counter-based cell stream ──────────────────────────────────────────────

_C_CELL = 0x9E6C63D0876A9A47
_C_STEP = 0xACF5AD432745937F
_C_SUB = 0xC83A91E1A5460B65


def cell_stream_u64(seed: int, cell_id: int, step: int, sub: int) -> int:
    """Keyed 64-bit value for (cell, step, substream) — pure, stateless."""
    x = mix64(seed ^ ((cell_id * _C_CELL) & _MASK64))
    x = mix64(x ^ ((step * _C_STEP) & _MASK64))
    x = mix64(x ^ ((sub * _C_SUB) & _MASK64))
    return x


def cell_stream_draw(seed: int, cell_id: int, step: int, sub: int) -> float:
    """Keyed uniform draw in [0, 1) for (cell, step, substream)."""
    return (cell_stream_u64(seed, cell_id, step, sub) >> 11) * 2.0**-53


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def cell_stream_uniform_ids(
    seed: int, cell_ids: np.ndarray, step: int, sub: int
) -> np.ndarray:
    """Vectorized twin of :func:`cell_stream_draw` over an array of cell ids.

    Bit-identical to the scalar path: uint64 arithmetic wraps mod 2**64 and
    the float conversion uses the same exact power-of-two scaling.
    """
    ids = cell_ids.astype(np.uint64, copy=False)
    with np.errstate(over="ignore"):
        x = np.uint64(seed) ^ (ids * np.uint64(_C_CELL))
        x = _mix64_vec(x)
        x ^= np.uint64((step * _C_STEP) & _MASK64)
        x = _mix64_vec(x)
        x ^= np.uint64((sub * _C_SUB) & _MASK64)
        x = _mix64_vec(x)
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53
