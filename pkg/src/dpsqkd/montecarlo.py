"""Slot-level Monte Carlo of a DPS-QKD link.

Conventions
-----------
Alice's pulse ``n`` carries phase ``phi[n]`` in {0, pi} (stored as a bit).
A click of Bob's interferometer at slot ``n`` comes from pulses ``n`` and
``n + 1`` interfering, so Alice's key bit for that slot is
``phi[n] ^ phi[n + 1]``: 0 routes to detector 1, 1 to detector 2.

Each run is split into fixed-size blocks of slots. Block ``k`` draws from
``SeedSequence(seed, spawn_key=(k,))`` and an attacker, when present, from
``spawn_key=(k, 1)``. Phases and tie-break bits are counter-based functions
of the absolute slot index, so the result does not depend on how blocks
are distributed over worker threads.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ._splitmix import counter_bits
from .params import SystemParams, link_budget

BLOCK_SLOTS = 1 << 22
PRBS7_PERIOD = 127


def prbs7_sequence(seed: int = 0x7F, length: int = PRBS7_PERIOD) -> np.ndarray:
    """Output of the Fibonacci LFSR with feedback polynomial x^7 + x^6 + 1."""
    if not 0 < seed < 128:
        raise ValueError("PRBS7 seed must be a nonzero 7-bit state")
    state = seed
    out = np.empty(length, dtype=np.uint8)
    for i in range(length):
        out[i] = (state >> 6) & 1
        fb = ((state >> 6) ^ (state >> 5)) & 1
        state = ((state << 1) | fb) & 0x7F
    return out


@dataclass(frozen=True)
class PhasePattern:
    """Alice's phase bits as a function of absolute slot index."""
    source: str  # "prbs7" or "random"
    prbs_seed: int = 0x7F
    key: int = 0

    def phase_bits(self, slots) -> np.ndarray:
        slots = np.asarray(slots, dtype=np.int64)
        if self.source == "prbs7":
            return prbs7_sequence(self.prbs_seed)[slots % PRBS7_PERIOD]
        if self.source == "random":
            return counter_bits(self.key, slots.astype(np.uint64))
        raise ValueError(f"unknown phase source {self.source!r}")

    def key_bits(self, slots) -> np.ndarray:
        slots = np.asarray(slots, dtype=np.int64)
        return self.phase_bits(slots) ^ self.phase_bits(slots + 1)


@dataclass(frozen=True)
class SiftedKey:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    slot_indices: np.ndarray

    def __post_init__(self):
        if not len(self.alice_bits) == len(self.bob_bits) == len(self.slot_indices):
            raise ValueError("sifted key arrays differ in length")

    def __len__(self):
        return len(self.alice_bits)


@dataclass(frozen=True)
class DetectionRecords:
    """Kept detector events, ordered by absolute time.

    ``migrated``, ``flipped`` and the attack columns are simulation ground
    truth and are not visible to the protocol.
    """
    slot: np.ndarray
    detector: np.ndarray  # 1 or 2
    offset: np.ndarray  # seconds from slot centre
    is_dark: np.ndarray
    migrated: np.ndarray
    flipped: np.ndarray
    attacked: np.ndarray
    eve_aligned: np.ndarray

    def __len__(self):
        return len(self.slot)


def write_records_csv(records: DetectionRecords, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "detector", "offset_ps", "is_dark"])
        for s, d, o, k in zip(records.slot, records.detector, records.offset, records.is_dark):
            w.writerow([int(s), int(d), f"{o * 1e12:.3f}", int(k)])


@dataclass(frozen=True)
class SimStats:
    n_slots: int
    photon_candidates: int
    dark_candidates: int
    never_detected: int
    window_rejected: int
    beyond_run: int
    deadtime_suppressed: int
    kept: int
    double_clicks: int
    sifted: int
    errors: int
    errors_baseline: int
    errors_dark: int
    errors_jitter: int
    errors_attack: int
    errors_double: int

    @property
    def ber(self) -> float:
        return self.errors / self.sifted if self.sifted else math.nan

    @property
    def sifted_fraction(self) -> float:
        return self.sifted / self.n_slots

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ber"] = self.ber
        d["sifted_fraction"] = self.sifted_fraction
        return d


@dataclass(frozen=True)
class SimRun:
    key: SiftedKey
    stats: SimStats
    records: DetectionRecords
    # per sifted bit, index into records of the click that produced it
    record_index: np.ndarray


def _bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Indices in [0, n) of successes of n Bernoulli(p) trials, via geometric gaps."""
    if p <= 0.0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n, dtype=np.int64)
    chunks, pos = [], -1
    while True:
        mean = (n - pos) * p
        m = int(mean + 6 * math.sqrt(mean) + 16)
        cs = pos + np.cumsum(rng.geometric(p, m))
        chunks.append(cs[cs < n])
        if cs[-1] >= n:
            break
        pos = int(cs[-1])
    return np.concatenate(chunks).astype(np.int64)


_FIELDS = ("slot", "bit", "offset", "is_dark", "migrated", "flipped", "attacked", "eve_aligned")


def _simulate_block(p: SystemParams, pattern: PhasePattern, seed: int, k: int,
                    n_slots: int, eve_fraction: float) -> tuple[dict, dict]:
    start = k * BLOCK_SLOTS
    nb = min(BLOCK_SLOTS, n_slots - start)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
    det, slot = p.detector, p.slot
    lb = link_budget(p)

    # photons that would click at Bob, before windowing
    pos = _bernoulli_positions(rng, nb, p.mean_photon_number * lb.transmittance_no_window) + start
    n_ph = len(pos)
    offsets = det.jitter.sample(rng, n_ph)
    flipped = rng.random(n_ph) < p.baseline_error

    origin = pos.copy()
    bits = pattern.key_bits(pos)
    attacked = np.zeros(n_ph, dtype=bool)
    aligned = np.zeros(n_ph, dtype=bool)
    if eve_fraction > 0 and n_ph:
        # Eve measured pair (n, n+1) and resent two pulses; Bob's click lands on the
        # pair before, on, or after it with probability 1/4, 1/2, 1/4.
        arng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k, 1)))
        attacked = arng.random(n_ph) < eve_fraction
        u = arng.random(n_ph)
        shift = np.where(u < 0.25, -1, np.where(u < 0.75, 0, 1))
        shift[~attacked] = 0
        aligned = attacked & (shift == 0)
        straddle = attacked & (shift != 0)
        bits = np.where(straddle, arng.integers(0, 2, n_ph, dtype=np.uint8), bits)
        origin = pos + shift
    bits = bits ^ flipped.astype(np.uint8)

    hop = np.floor((offsets + slot / 2) / slot).astype(np.int64)
    resid = offsets - hop * slot
    ph_slot = origin + hop
    in_window = np.abs(resid) <= det.window / 2
    in_run = (ph_slot >= 0) & (ph_slot < n_slots)

    dark_slots, dark_bits, dark_off = [], [], []
    for b in (0, 1):
        nd = int(rng.poisson(det.dark_rate * nb * slot))
        dark_slots.append(rng.integers(start, start + nb, nd, dtype=np.int64))
        dark_off.append(rng.uniform(-slot / 2, slot / 2, nd))
        dark_bits.append(np.full(nd, b, dtype=np.uint8))
    d_slot = np.concatenate(dark_slots)
    d_off = np.concatenate(dark_off)
    d_win = np.abs(d_off) <= det.window / 2
    n_dark = len(d_slot)

    keep_ph = in_window & in_run
    zeros = np.zeros(int(d_win.sum()), dtype=bool)
    ev = {
        "slot": np.concatenate([ph_slot[keep_ph], d_slot[d_win]]),
        "bit": np.concatenate([bits[keep_ph], np.concatenate(dark_bits)[d_win]]),
        "offset": np.concatenate([resid[keep_ph], d_off[d_win]]),
        "is_dark": np.concatenate([np.zeros(int(keep_ph.sum()), dtype=bool), ~zeros]),
        "migrated": np.concatenate([(hop != 0)[keep_ph], zeros]),
        "flipped": np.concatenate([flipped[keep_ph], zeros]),
        "attacked": np.concatenate([attacked[keep_ph], zeros]),
        "eve_aligned": np.concatenate([aligned[keep_ph], zeros]),
    }
    counts = {
        "photon_candidates": n_ph,
        "dark_candidates": n_dark,
        "never_detected": nb - n_ph,
        "window_rejected": int((~in_window).sum()) + int((~d_win).sum()),
        "beyond_run": int((in_window & ~in_run).sum()),
    }
    return ev, counts


def simulate_run(p: SystemParams, n_slots: int, seed: int, *, pattern: PhasePattern | None = None,
                 eve_fraction: float = 0.0, threads: int = 1) -> SimRun:
    """Simulate ``n_slots`` clock slots and sift the resulting detections."""
    if n_slots < 2:
        raise ValueError("n_slots must be >= 2")
    if not 0.0 <= eve_fraction <= 1.0:
        raise ValueError("eve_fraction must lie in [0, 1]")
    if pattern is None:
        pattern = PhasePattern("prbs7")
    n_blocks = (n_slots + BLOCK_SLOTS - 1) // BLOCK_SLOTS
    job = lambda k: _simulate_block(p, pattern, seed, k, n_slots, eve_fraction)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(n_blocks)))
    else:
        parts = [job(k) for k in range(n_blocks)]

    ev = {f: np.concatenate([e[f] for e, _ in parts]) for f in _FIELDS}
    counts = {c: sum(cnt[c] for _, cnt in parts) for c in parts[0][1]}

    # dead time: a detector ignores any click within dead_time of its previous
    # in-window click, whether or not that one was itself suppressed
    t = ev["slot"] * p.slot + ev["offset"]
    order = np.lexsort((ev["bit"], t))
    ev = {f: v[order] for f, v in ev.items()}
    t = t[order]
    alive = np.ones(len(t), dtype=bool)
    for b in (0, 1):
        idx = np.flatnonzero(ev["bit"] == b)
        if len(idx) > 1:
            alive[idx[1:][np.diff(t[idx]) < p.detector.dead_time]] = False
    suppressed = int((~alive).sum())
    ev = {f: v[alive] for f, v in ev.items()}

    records = DetectionRecords(
        slot=ev["slot"], detector=ev["bit"].astype(np.int8) + 1, offset=ev["offset"],
        is_dark=ev["is_dark"], migrated=ev["migrated"], flipped=ev["flipped"],
        attacked=ev["attacked"], eve_aligned=ev["eve_aligned"],
    )

    # sifting: one bit per announced slot; a double click gets a random bit
    by_slot = np.argsort(records.slot, kind="stable")
    s_sorted = records.slot[by_slot]
    first = np.ones(len(s_sorted), dtype=bool)
    first[1:] = s_sorted[1:] != s_sorted[:-1]
    rec_idx = by_slot[first]
    slots = s_sorted[first]
    n_in_slot = np.diff(np.append(np.flatnonzero(first), len(s_sorted)))
    double = n_in_slot > 1
    bob = ev["bit"][rec_idx].copy()
    if double.any():
        tie_key = int(np.random.SeedSequence(seed, spawn_key=(2**32,)).generate_state(1, np.uint64)[0])
        bob[double] = counter_bits(tie_key, slots[double].astype(np.uint64))
    alice = pattern.key_bits(slots)
    key = SiftedKey(alice_bits=alice, bob_bits=bob, slot_indices=slots)

    err = alice != bob
    is_dark = records.is_dark[rec_idx]
    mig = records.migrated[rec_idx] & ~is_dark
    att = records.attacked[rec_idx] & ~records.eve_aligned[rec_idx] & ~is_dark & ~mig
    plain = ~(is_dark | mig | att | double)
    stats = SimStats(
        n_slots=n_slots,
        deadtime_suppressed=suppressed,
        kept=len(records),
        double_clicks=int(double.sum()),
        sifted=len(key),
        errors=int(err.sum()),
        errors_baseline=int((err & plain).sum()),
        errors_dark=int((err & is_dark & ~double).sum()),
        errors_jitter=int((err & mig & ~double).sum()),
        errors_attack=int((err & att & ~double).sum()),
        errors_double=int((err & double).sum()),
        **counts,
    )
    return SimRun(key=key, stats=stats, records=records, record_index=rec_idx)


def simulate(p: SystemParams, n_slots: int, seed: int, **kw) -> tuple[SiftedKey, SimStats]:
    run = simulate_run(p, n_slots, seed, **kw)
    return run.key, run.stats


def measure_ber(key: SiftedKey) -> tuple[float, int]:
    n = len(key)
    if n == 0:
        raise ValueError("cannot measure the error rate of an empty key")
    return float(np.count_nonzero(key.alice_bits != key.bob_bits)) / n, n
