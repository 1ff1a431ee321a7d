"""Deterministic, splittable random streams.

Every source of randomness in the package flows through a
:class:`RandomStream`, a counter-based splitmix64 generator whose whole
state is one 64-bit integer. Streams are derived, never shared: folding
a sequence of 64-bit labels into a base seed with :func:`derive_stream`
yields a generator that is independent of streams derived under any
other label sequence and of the order in which work is scheduled.

The counter design means a block of ``n`` draws equals ``n`` single
draws, so batched and one-at-a-time consumers see identical values.
Module-level ``*_from_states`` helpers run many streams side by side as
a vector of states; row ``r`` of their output is bit-identical to the
same calls on a scalar ``RandomStream`` seeded with ``states[r]``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_GAMMA_U = np.uint64(_GAMMA)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

# Shortest double that still maps the top 53 bits onto [0, 1).
_U53 = 2.0 ** -53


def mix64(x: int) -> int:
    """Finalize one 64-bit value (the splitmix64 output function)."""
    z = (x + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _finalize_u64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _MIX1_U
    z = (z ^ (z >> _S27)) * _MIX2_U
    return z ^ (z >> _S31)


def derive_stream(base_seed: int, labels: tuple[int, ...] | list[int]) -> "RandomStream":
    """Fold a label path into a base seed and return the resulting stream.

    Equal ``(base_seed, labels)`` pairs give equal streams; any change to
    either gives a statistically independent one.
    """
    s = mix64(base_seed & _MASK)
    for label in labels:
        s = mix64(s ^ mix64(label & _MASK))
    return RandomStream(s, origin=tuple(int(l) & _MASK for l in labels))


class RandomStream:
    """Counter-based splitmix64 generator.

    ``state`` advances by GAMMA per draw; each output is the finalizer
    applied to the advanced state, so draw ``i`` of a block equals the
    ``i``-th sequential draw.
    """

    __slots__ = ("state", "origin")

    def __init__(self, state: int, origin: tuple[int, ...] = ()):
        self.state = int(state) & _MASK
        self.origin = origin

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = ((self.state ^ (self.state >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def raw(self, n: int) -> np.ndarray:
        """Return ``n`` raw 64-bit draws as a uint64 array."""
        if n < 0:
            raise ConfigurationError(f"draw count must be >= 0, got {n}")
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        idx = np.arange(1, n + 1, dtype=np.uint64)
        out = _finalize_u64(np.uint64(self.state) + idx * _GAMMA_U)
        self.state = (self.state + n * _GAMMA) & _MASK
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` float64 draws in [0, 1)."""
        return (self.raw(n) >> _S11).astype(np.float64) * _U53

    def gauss(self, n: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """``n`` binary32 Gaussian draws via Box-Muller.

        Each draw consumes exactly two raw values, so gauss(n) matches n
        calls of gauss(1). The transform runs in float64 and rounds once
        to binary32 at the end.
        """
        r = self.raw(2 * n)
        u1 = ((r[0::2] >> _S11).astype(np.float64) + 1.0) * _U53  # (0, 1], log-safe
        u2 = (r[1::2] >> _S11).astype(np.float64) * _U53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return (mean + std * z).astype(np.float32)

    def randbelow(self, n: int, bound: int) -> np.ndarray:
        """``n`` int64 draws uniform over [0, bound)."""
        if bound <= 0:
            raise ConfigurationError(f"bound must be positive, got {bound}")
        return (self.raw(n) % np.uint64(bound)).astype(np.int64)

    def choose(self, population: int, k: int) -> np.ndarray:
        """Pick ``k`` of ``population`` indices without replacement.

        Draws one key per candidate and keeps the k smallest; ties break
        toward the lower index. Returns sorted int64 indices. Consumes
        exactly ``population`` raw values regardless of ``k``.
        """
        if not 0 <= k <= population:
            raise ConfigurationError(
                f"cannot choose {k} from population of {population}"
            )
        keys = self.raw(population)
        if k == 0:
            return np.empty(0, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        return np.sort(order[:k].astype(np.int64))

    def child(self, label: int) -> "RandomStream":
        """Derive an independent stream from the current state."""
        s = mix64(self.state ^ mix64(label & _MASK))
        return RandomStream(s, origin=self.origin + (int(label) & _MASK,))


def fnv1a64(text: str) -> int:
    """FNV-1a hash of UTF-8 text, for turning string ids into labels."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


# --- Vectorized multi-stream helpers -------------------------------------
#
# A batch of streams is a uint64 state vector. Each helper returns the
# drawn block plus the advanced states; per-row results are bit-identical
# to the scalar RandomStream methods of the same name.


def states_from_streams(streams: list[RandomStream]) -> np.ndarray:
    return np.array([s.state for s in streams], dtype=np.uint64)


def raw_from_states(states: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(R,) states -> ((R, n) uint64 draws, advanced states)."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    out = _finalize_u64(states[:, None] + idx[None, :] * _GAMMA_U)
    # Advance computed in Python ints: a numpy scalar*scalar would warn on
    # the (intentional) modular wrap.
    return out, states + np.uint64((n * _GAMMA) & _MASK)


def gauss_from_states(
    states: np.ndarray, n: int, mean: float = 0.0, std: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row Box-Muller block, matching RandomStream.gauss row-wise."""
    r, states = raw_from_states(states, 2 * n)
    u1 = ((r[:, 0::2] >> _S11).astype(np.float64) + 1.0) * _U53
    u2 = (r[:, 1::2] >> _S11).astype(np.float64) * _U53
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return (mean + std * z).astype(np.float32), states


def randbelow_from_states(
    states: np.ndarray, n: int, bound: int
) -> tuple[np.ndarray, np.ndarray]:
    r, states = raw_from_states(states, n)
    return (r % np.uint64(bound)).astype(np.int64), states


def choose_from_states(
    states: np.ndarray, population: int, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise choose: (R, k) sorted indices, matching RandomStream.choose."""
    keys, states = raw_from_states(states, population)
    if k == 0:
        return np.empty((states.shape[0], 0), dtype=np.int64), states
    order = np.argsort(keys, axis=1, kind="stable")
    return np.sort(order[:, :k].astype(np.int64), axis=1), states
