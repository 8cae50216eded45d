import json

import pytest
from hypothesis import given, strategies as st

from dpsqkd.detector import DetectorModel, JitterModel
from dpsqkd.params import (ConfigError, link_budget, load_config, params_from_dict,
                           params_to_dict, preset, store_config)

BASE = {
    "clock_rate_hz": 1e9,
    "mean_photon_number": 0.2,
    "fiber_length_km": 100,
    "detector": {"quantum_efficiency": 0.004, "dark_rate_hz": 350, "window_s": 100e-12},
}


def _write(tmp_path, d):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps(d))
    return f


def test_load_operating_point_b(tmp_path):
    p = load_config(_write(tmp_path, BASE))
    assert p.mean_photon_number == 0.2
    assert p.clock_rate == 1e9
    assert p.detector.quantum_efficiency == 0.004
    assert p.detector.window == 100e-12
    # documented defaults
    assert p.fiber_attenuation == 0.2
    assert p.extra_loss_db == 2.0
    assert p.baseline_error == 0.015
    assert p.ec_efficiency == 1.16
    assert p.detector.dead_time == 60e-9


@pytest.mark.parametrize("patch, fragment", [
    ({"mean_photon_number": 0}, "0 < mu < 1"),
    ({"mean_photon_number": 1.0}, "0 < mu < 1"),
    ({"ec_efficiency": 0.9}, "ec_efficiency"),
    ({"fiber_length_km": -1}, "fiber_length"),
    ({"baseline_error": 0.5}, "baseline_error"),
    ({"clock_rate_hz": 1e10, "detector": {**BASE["detector"], "window_s": 200e-12}}, "slot period"),
    ({"schema_version": 2}, "schema_version"),
    ({"fiber_length_km": "100"}, "must be a number"),
])
def test_invalid_configs(tmp_path, patch, fragment):
    with pytest.raises(ConfigError, match=fragment):
        load_config(_write(tmp_path, {**BASE, **patch}))


def test_missing_key_is_named(tmp_path):
    d = dict(BASE)
    del d["clock_rate_hz"]
    with pytest.raises(ConfigError, match="clock_rate_hz"):
        load_config(_write(tmp_path, d))


def test_malformed_json(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(f)


def test_dark_counts_per_window():
    assert link_budget(preset("a")).dark_prob_per_window == pytest.approx(1.96e-5, rel=1e-12)
    assert link_budget(preset("a")).dark_prob_per_window == pytest.approx(1.95e-5, rel=0.01)
    assert link_budget(preset("b")).dark_prob_per_window == pytest.approx(3.5e-8, rel=1e-12)


def test_lossless_identity():
    det = DetectorModel(1.0, 0.0, 1e-9, jitter=JitterModel(1e-12))
    p = preset("a", detector=det, fiber_length=0.0, extra_loss_db=0.0)
    assert link_budget(p).transmittance == pytest.approx(1.0, abs=1e-15)


def test_transmittance_formula():
    p = preset("b")
    lb = link_budget(p)
    expected = 10 ** (-(0.2 * 100 + 2.0) / 10) * 0.004 * p.detector.pass_fraction
    assert lb.transmittance == pytest.approx(expected, rel=1e-14)
    assert lb.transmittance_no_window == pytest.approx(10 ** -2.2 * 0.004, rel=1e-14)
    assert lb.signal_prob_per_slot == pytest.approx(0.2 * lb.transmittance)


@given(st.floats(0, 300), st.floats(0.01, 50))
def test_transmittance_strictly_decreasing_in_length(L, dL):
    p = preset("b")
    t1 = link_budget(p.with_(fiber_length=L)).transmittance
    t2 = link_budget(p.with_(fiber_length=L + dL)).transmittance
    assert t2 < t1


@given(mu=st.floats(0.001, 0.999), L=st.floats(0, 500), alpha=st.floats(0, 1),
       e=st.floats(0, 0.49), f=st.floats(1, 2), eta=st.floats(1e-4, 1),
       frac=st.floats(0, 1), decay=st.floats(1e-12, 1e-9))
def test_config_round_trip(tmp_path_factory, mu, L, alpha, e, f, eta, frac, decay):
    det = DetectorModel(eta, 350.0, 100e-12, jitter=JitterModel(75e-12, frac, decay))
    p = preset("b", detector=det, mean_photon_number=mu, fiber_length=L,
               fiber_attenuation=alpha, baseline_error=e, ec_efficiency=f)
    path = tmp_path_factory.mktemp("cfg") / "p.json"
    store_config(p, path)
    assert load_config(path) == p
    assert params_from_dict(params_to_dict(p)) == p
