"""Analytic key-rate engine for DPS-QKD under general individual attacks."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .detector import adjacent_slot_leakage
from .params import LinkBudget, SystemParams, link_budget

INV_PHI = (math.sqrt(5) - 1) / 2


class NoSecureRateError(RuntimeError):
    """Secure key rate is zero for every admissible mean photon number."""


class DegenerateInputError(ValueError):
    pass


def binary_entropy(e: float) -> float:
    """h(e) in bits, with 0*log2(0) taken as 0."""
    if e <= 0.0 or e >= 1.0:
        return 0.0
    return -(e * math.log2(e) + (1 - e) * math.log2(1 - e))


def sifted_rate(clock_rate: float, mu: float, T: float, dead_time: float) -> float:
    """Dead-time limited sifted rate of a free-running detector pair (bit/s)."""
    r = clock_rate * mu * T
    return r * math.exp(-r * dead_time / 2.0)


def collision_prob_bound(e: float) -> float:
    """Upper bound on Eve's per-bit collision probability from her probe."""
    return 1.0 - e * e - (1.0 - 6.0 * e) ** 2 / 2.0


def pns_factor(mu: float, T: float) -> float:
    """Fraction of the sifted key not fully exposed to photon splitting."""
    return 1.0 - min(1.0, 2.0 * mu * (1.0 - T))


def shrink_factor(e: float, mu: float, T: float) -> float:
    pc0 = collision_prob_bound(e)
    if pc0 >= 1.0:
        return 0.0
    if pc0 <= 0.0:
        # bound leaves (0, 1) for e above ~0.4; the upper clamp is the pc0 -> 0+ limit
        return 1.0
    tau = -pns_factor(mu, T) * math.log2(pc0)
    return min(1.0, max(0.0, tau))


def secure_fraction(e: float, mu: float, T: float, f: float) -> float:
    """Secure bits per sifted bit before clamping; negative past the cutoff."""
    return shrink_factor(e, mu, T) - f * binary_entropy(e)


def secure_rate(sifted: float, e: float, mu: float, T: float, f: float) -> float:
    return max(0.0, sifted * secure_fraction(e, mu, T, f))


@dataclass(frozen=True)
class ErrorBudget:
    baseline: float
    dark: float
    jitter: float

    @property
    def total(self) -> float:
        return self.baseline + self.dark + self.jitter

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.baseline, self.dark, self.jitter)


@dataclass(frozen=True)
class SlotProbabilities:
    """Per-slot click probabilities by origin, after window gating."""
    signal: float
    dark: float
    jitter: float

    @property
    def total(self) -> float:
        return self.signal + self.dark + self.jitter


def slot_probabilities(p: SystemParams, lb: LinkBudget) -> SlotProbabilities:
    det = p.detector
    leak = adjacent_slot_leakage(det.jitter, det.window, p.slot)
    return SlotProbabilities(
        signal=p.mean_photon_number * lb.transmittance,
        dark=2.0 * lb.dark_prob_per_window,
        jitter=p.mean_photon_number * lb.transmittance_no_window * leak,
    )


def error_model(p: SystemParams, lb: LinkBudget) -> tuple[float, ErrorBudget]:
    """Total bit error rate and its split into baseline, dark and jitter parts.

    Dark clicks and clicks that migrated from the previous slot carry a
    random bit, so each errs half the time.
    """
    sp = slot_probabilities(p, lb)
    denom = sp.total
    if denom <= 0:
        raise DegenerateInputError("no signal, dark or jitter clicks: error rate undefined")
    budget = ErrorBudget(
        baseline=p.baseline_error * sp.signal / denom,
        dark=0.5 * sp.dark / denom,
        jitter=0.5 * sp.jitter / denom,
    )
    return budget.total, budget


def click_probability(p: SystemParams, lb: LinkBudget) -> float:
    """Expected sifted bits per slot counting every click source.

    Same dead-time law as :func:`sifted_rate`, applied to the total gated
    click rate split evenly over the two detectors.
    """
    q = slot_probabilities(p, lb).total
    return q * math.exp(-p.clock_rate * q * p.detector.dead_time / 2.0)


@dataclass(frozen=True)
class RateReport:
    mu: float
    transmittance: float
    sifted_rate: float
    error_rate: float
    error_budget: tuple[float, float, float]
    collision_prob_per_bit: float
    shrink_factor: float
    secure_rate: float

    @property
    def beyond_secure_distance(self) -> bool:
        return self.secure_rate <= 0.0


def rate_report(p: SystemParams, lb: LinkBudget | None = None) -> RateReport:
    lb = lb or link_budget(p)
    mu, T = p.mean_photon_number, lb.transmittance
    e, budget = error_model(p, lb)
    rs = sifted_rate(p.clock_rate, mu, T, p.detector.dead_time)
    return RateReport(
        mu=mu,
        transmittance=T,
        sifted_rate=rs,
        error_rate=e,
        error_budget=budget.as_tuple(),
        collision_prob_per_bit=collision_prob_bound(e),
        shrink_factor=shrink_factor(e, mu, T),
        secure_rate=secure_rate(rs, e, mu, T, p.ec_efficiency),
    )


def golden_section_max(f, a: float, b: float, tol: float = 1e-6) -> float:
    """Maximiser of a unimodal ``f`` on ``[a, b]`` to absolute tolerance ``tol``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2


def _with_mu(p: SystemParams, lb: LinkBudget, mu: float) -> tuple[SystemParams, LinkBudget]:
    # T does not depend on mu; only the signal probability does.
    return replace(p, mean_photon_number=mu), replace(lb, signal_prob_per_slot=mu * lb.transmittance)


def _secure_at(p: SystemParams, lb: LinkBudget, mu: float) -> float:
    return rate_report(*_with_mu(p, lb, mu)).secure_rate


def optimize_mu(p: SystemParams, tol: float = 1e-6, grid: int = 200) -> tuple[float, RateReport]:
    """Mean photon number that maximises the secure rate.

    A coarse scan over (0, 1) brackets the peak (the clamped objective is
    flat at zero outside the secure region), then golden-section search
    refines it.
    """
    lb = link_budget(p)
    mus = np.linspace(0.0, 1.0, grid + 1)[1:-1]
    vals = np.array([_secure_at(p, lb, m) for m in mus])
    i = int(np.argmax(vals))
    if vals[i] <= 0.0:
        raise NoSecureRateError(
            f"secure rate is zero for every mu at {p.fiber_length:g} km")
    lo = mus[i - 1] if i > 0 else mus[0] / 2
    hi = mus[i + 1] if i + 1 < len(mus) else (mus[-1] + 1.0) / 2
    mu_star = float(golden_section_max(lambda m: _secure_at(p, lb, m), float(lo), float(hi), tol))
    return mu_star, rate_report(*_with_mu(p, lb, mu_star))


def stationarity(p: SystemParams, mu: float, rel_step: float = 1e-4) -> float:
    """Central-difference dR/dmu scaled by mu / R; near zero at an optimum."""
    lb = link_budget(p)
    h = rel_step * mu
    r0 = _secure_at(p, lb, mu)
    if r0 <= 0:
        return math.inf
    deriv = (_secure_at(p, lb, mu + h) - _secure_at(p, lb, mu - h)) / (2 * h)
    return deriv * mu / r0


@dataclass(frozen=True)
class SweepPoint:
    length_km: float
    report: RateReport
    optimized: bool


def distance_sweep(p: SystemParams, lengths, optimize: bool = False) -> list[SweepPoint]:
    """Rate reports at each fiber length, in input order.

    With ``optimize`` set, lengths where no mu gives a positive secure rate
    fall back to the configured mu and report a zero secure rate.
    """
    lengths = list(lengths)
    if not lengths:
        raise ValueError("lengths must be non-empty")
    out = []
    for L in lengths:
        if L < 0:
            raise ValueError(f"fiber length must be >= 0, got {L}")
        q = replace(p, fiber_length=float(L))
        if optimize:
            try:
                _, rep = optimize_mu(q)
                out.append(SweepPoint(float(L), rep, True))
                continue
            except NoSecureRateError:
                pass
        out.append(SweepPoint(float(L), rate_report(q), False))
    return out
