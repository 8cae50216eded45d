"""SplitMix64 as a counter-based generator.

Word ``i`` of the stream keyed by ``seed`` is ``mix(seed + (i + 1) * GAMMA)``
(arithmetic mod 2**64), so any position can be evaluated without state.
This is the reference SplitMix64 sequence started from ``seed``.
"""
import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, counters) -> np.ndarray:
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (c + np.uint64(1)) * GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_bits(seed: int, n: int) -> np.ndarray:
    """First ``n`` bits of the stream, least-significant bit of word 0 first."""
    words = splitmix64(seed, np.arange((n + 63) // 64, dtype=np.uint64))
    return np.unpackbits(words.astype("<u8").view(np.uint8), bitorder="little")[:n]


def counter_bits(seed: int, counters) -> np.ndarray:
    """One bit per counter: the top bit of the corresponding word."""
    return (splitmix64(seed, counters) >> np.uint64(63)).astype(np.uint8)
