"""Sifted key to secure key: error estimation, leakage accounting, hashing.

Error correction is not run. The simulation knows Alice's string, so Bob's
corrected string is taken to be hers, and the information a real
reconciliation code would disclose is charged as ``f * h(e)`` bits per bit.

Toeplitz hash seeds are expanded bit-exactly: the ``m + n - 1`` diagonal
bits are the first bits of the SplitMix64 stream keyed by ``hash_seed``,
taken least-significant bit first from each 64-bit word. Entry ``(i, j)``
of the ``m x n`` matrix is diagonal bit ``i - j + n - 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from ._splitmix import stream_bits
from .montecarlo import SiftedKey
from .params import SystemParams
from .rates import binary_entropy, shrink_factor

MIN_KEY_FOR_ESTIMATE = 100


class KeyTooShortError(ValueError):
    pass


def estimate_error(key: SiftedKey, sample_fraction: float, seed: int) -> tuple[float, np.ndarray]:
    """Disclose a random sample of positions and return the observed error rate."""
    if not 0.0 < sample_fraction < 1.0:
        raise ValueError("sample_fraction must lie in (0, 1)")
    n = len(key)
    if n < MIN_KEY_FOR_ESTIMATE:
        raise KeyTooShortError(f"need at least {MIN_KEY_FOR_ESTIMATE} sifted bits, got {n}")
    m = max(1, int(round(sample_fraction * n)))
    rng = np.random.default_rng(seed)
    pos = np.sort(rng.choice(n, size=m, replace=False))
    e_hat = float(np.count_nonzero(key.alice_bits[pos] != key.bob_bits[pos])) / m
    return e_hat, pos


def toeplitz_diagonals(n: int, m: int, hash_seed: int) -> np.ndarray:
    return stream_bits(hash_seed, m + n - 1)


def toeplitz_matrix(n: int, m: int, hash_seed: int) -> np.ndarray:
    t = toeplitz_diagonals(n, m, hash_seed)
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    return t[i - j + n - 1]


def privacy_amplify(bits, final_length: int, hash_seed: int) -> np.ndarray:
    """Hash ``bits`` to ``final_length`` bits with a seeded binary Toeplitz matrix."""
    x = np.asarray(bits, dtype=np.uint8)
    n = len(x)
    if not 0 <= final_length <= n:
        raise ValueError(f"final_length must lie in [0, {n}]")
    if final_length == 0:
        return np.empty(0, dtype=np.uint8)
    t = toeplitz_diagonals(n, final_length, hash_seed)
    # y_i = sum_j t[i - j + n - 1] x_j = (t * x)[i + n - 1]
    conv = fftconvolve(t.astype(np.float64), x.astype(np.float64))[n - 1:n - 1 + final_length]
    counts = np.rint(conv)
    if np.max(np.abs(conv - counts)) > 0.25:
        raise ArithmeticError("FFT rounding error too large for exact GF(2) product")
    return (counts.astype(np.int64) & 1).astype(np.uint8)


def final_key_length(n_remaining: int, e: float, mu: float, T: float, f: float) -> int:
    frac = shrink_factor(e, mu, T) - f * binary_entropy(e)
    return max(0, math.floor(n_remaining * frac))


@dataclass(frozen=True)
class SecureKeyResult:
    key: np.ndarray
    bob_key: np.ndarray
    sifted_length: int
    disclosed_count: int
    final_length: int
    e_hat: float
    tau: float
    hash_seed: int

    @property
    def realized_ratio(self) -> float:
        return self.final_length / self.sifted_length if self.sifted_length else 0.0

    @property
    def empty(self) -> bool:
        return self.final_length == 0

    def sidecar(self) -> dict:
        return {
            "length_bits": self.final_length,
            "e_hat": self.e_hat,
            "tau": self.tau,
            "final_length": self.final_length,
            "hash_seed": self.hash_seed,
        }


def distill(key: SiftedKey, p: SystemParams, T: float, sample_seed: int = 0, hash_seed: int = 0,
            sample_fraction: float = 0.1) -> SecureKeyResult:
    """Estimate the error rate, size the final key and hash both parties' strings."""
    if len(key) == 0:
        raise KeyTooShortError("empty sifted key")
    e_hat, disclosed = estimate_error(key, sample_fraction, sample_seed)
    keep = np.ones(len(key), dtype=bool)
    keep[disclosed] = False
    alice = key.alice_bits[keep]
    # stand-in for error correction: Bob ends up holding Alice's string
    bob = alice.copy()
    tau = shrink_factor(e_hat, p.mean_photon_number, T)
    m = final_key_length(len(alice), e_hat, p.mean_photon_number, T, p.ec_efficiency)
    return SecureKeyResult(
        key=privacy_amplify(alice, m, hash_seed),
        bob_key=privacy_amplify(bob, m, hash_seed),
        sifted_length=len(key),
        disclosed_count=len(disclosed),
        final_length=m,
        e_hat=e_hat,
        tau=tau,
        hash_seed=hash_seed,
    )


def write_key(result: SecureKeyResult, path) -> None:
    """Write packed key bytes (MSB first) to ``path`` and a JSON sidecar next to it."""
    path = Path(path)
    path.write_bytes(np.packbits(result.key, bitorder="big").tobytes())
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(result.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_key(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="big")[:meta["length_bits"]], meta
