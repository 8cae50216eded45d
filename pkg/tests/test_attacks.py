import itertools
import math

import pytest

from dpsqkd.attacks import (RESEND_ALIGNMENT, intercept_resend_error_oracle, migration_probability,
                            pns_fraction, simulate_intercept_resend)
from dpsqkd.detector import adjacent_slot_leakage, window_pass_fraction
from dpsqkd.montecarlo import simulate


def test_pns_fraction_examples():
    assert pns_fraction(0.2, 0.0) == pytest.approx(0.4)
    assert pns_fraction(0.2, 1.0) == 0.0
    assert pns_fraction(0.2, 0.0143) == pytest.approx(0.39428)
    assert pns_fraction(0.9, 0.0) == 1.0


def test_resend_oracle_hand_count():
    # Eve's reading lands on the correct pair half the time (bit known),
    # otherwise on a neighbour pair whose bit is independent: error 1/2.
    assert sum(RESEND_ALIGNMENT.values()) == 1.0
    assert intercept_resend_error_oracle() == pytest.approx(0.25, abs=1e-15)
    e0 = 0.015
    assert intercept_resend_error_oracle(e0) == pytest.approx(0.5 * e0 + 0.5 * 0.5, abs=1e-15)
    # a late click is scored against the next pair, an independent bit
    m = 0.1
    expected = (1 - m) * (0.5 * e0 + 0.25) + m * 0.5
    assert intercept_resend_error_oracle(e0, m) == pytest.approx(expected, abs=1e-15)


def test_migration_probability(preset_a):
    j, w = preset_a.detector.jitter, preset_a.detector.window
    leak = adjacent_slot_leakage(j, w, 1e-9)
    assert migration_probability(preset_a) == pytest.approx(leak / (window_pass_fraction(j, w) + leak))
    assert 0.005 < migration_probability(preset_a) < 0.02


def test_resend_oracle_by_enumeration():
    # brute force over three phases and Eve's alignment
    err = 0.0
    for phases in itertools.product((0, 1), repeat=3):
        true_bit = phases[1] ^ phases[2]
        for shift, w in RESEND_ALIGNMENT.items():
            if shift == 0:
                bob = true_bit
                err += w * (bob != true_bit) / 8
            else:
                for resent in (0, 1):  # straddling click: random outcome
                    err += w * 0.5 * (resent != true_bit) / 8
    assert intercept_resend_error_oracle() == pytest.approx(err)


def test_zero_fraction_is_unattacked_link(preset_a):
    _, st = simulate_intercept_resend(preset_a, 0.0, 10**6, seed=4)
    _, base = simulate(preset_a, 10**6, seed=4)
    assert st.attacked_sifted == 0
    assert st.sim.sifted == base.sifted and st.sim.errors == base.errors


def test_ber_grows_with_fraction(preset_a):
    bers = [simulate_intercept_resend(preset_a, f, 4 * 10**6, seed=8)[1].ber for f in (0.0, 0.5, 1.0)]
    assert bers[0] < bers[1] < bers[2]


def test_rejects_bad_fraction(preset_a):
    with pytest.raises(ValueError):
        simulate_intercept_resend(preset_a, 1.5, 1000, seed=0)


def test_full_attack_breaks_security(preset_a):
    _, st = simulate_intercept_resend(preset_a, 1.0, 5 * 10**6, seed=9)
    oracle = intercept_resend_error_oracle(preset_a.baseline_error, migration_probability(preset_a))
    sigma = math.sqrt(oracle * (1 - oracle) / st.attacked_sifted)
    assert abs(st.induced_ber - oracle) < 3 * sigma
    assert st.secure_fraction_raw <= 0 and st.secure_rate == 0.0
