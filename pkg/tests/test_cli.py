import csv
import io
import json

import pytest

from dpsqkd.attacks import migration_probability
from dpsqkd.params import preset
from dpsqkd.cli import EXIT_CONFIG, EXIT_IO, EXIT_NO_SECURE, EXIT_OK, main, parse_lengths, CliError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_lengths():
    assert parse_lengths("0:150:5")[-1] == 150.0
    assert len(parse_lengths("0:150:5")) == 31
    assert parse_lengths("10,25,100") == [10.0, 25.0, 100.0]
    with pytest.raises(CliError):
        parse_lengths("0:10:0")
    with pytest.raises(CliError):
        parse_lengths("a,b")


def test_analyze_csv_stdout(capsys):
    code, out, _ = run(capsys, "--preset", "b", "analyze", "--lengths", "0:150:5")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 31
    rate = [float(r["secure_rate"]) for r in rows]
    assert rate[0] > rate[10] > rate[20] > 0
    assert rate[-1] == 0.0


def test_analyze_json_file(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, _, _ = run(capsys, "--preset", "a", "analyze", "--lengths", "10", "--optimize-mu", "--out", str(out))
    assert code == EXIT_OK
    rows = json.loads(out.read_text())
    assert rows[0]["length_km"] == 10.0 and rows[0]["secure_rate"] > 0


def test_analyze_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "--preset", "b", "analyze", "--lengths", "0:120:10", "--out", str(a))
    run(capsys, "--preset", "b", "analyze", "--lengths", "0:120:10", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_optimize_mu(capsys):
    code, out, _ = run(capsys, "--preset", "a", "optimize-mu")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["stationarity"]["passed"]
    assert 0.15 <= doc["mu_star"] <= 0.25


def test_optimize_mu_no_secure_rate(tmp_path, capsys):
    cfg = tmp_path / "far.json"
    cfg.write_text(json.dumps({"clock_rate_hz": 1e9, "mean_photon_number": 0.2, "fiber_length_km": 250,
                               "detector": {"quantum_efficiency": 0.004, "dark_rate_hz": 350,
                                            "window_s": 1e-10}}))
    code, out, _ = run(capsys, "optimize-mu", "--config", str(cfg))
    assert code == EXIT_NO_SECURE
    assert json.loads(out)["mu_star"] is None


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"clock_rate_hz": 1e9, "mean_photon_number": 0}))
    code, _, err = run(capsys, "analyze", "--config", str(cfg))
    assert code == EXIT_CONFIG and "error" in err


def test_missing_config_is_io_error(tmp_path, capsys):
    code, _, _ = run(capsys, "analyze", "--config", str(tmp_path / "nope.json"))
    assert code == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path, capsys):
    code, _, _ = run(capsys, "--preset", "a", "analyze", "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == EXIT_IO


def test_no_params_given(capsys):
    assert run(capsys, "analyze")[0] == EXIT_CONFIG


def test_simulate_repeat_and_outputs(tmp_path, capsys):
    d = tmp_path / "run"
    code, _, _ = run(capsys, "--preset", "a", "simulate", "--slots", "2000000", "--seed", "7",
                     "--repeat", "3", "--out", str(d), "--keys", "--records")
    assert code == EXIT_OK
    doc = json.loads((d / "stats.json").read_text())
    assert len(doc["runs"]) == 3 and [r["seed"] for r in doc["runs"]] == [7, 8, 9]
    assert doc["summary"]["ber"]["sd"] > 0
    assert (d / "run0_alice.key").exists() and (d / "run0_alice.key.json").exists()
    assert (d / "run2_records.csv").exists()
    assert (d / "run1_alice.key").read_bytes() == (d / "run1_bob.key").read_bytes()


def test_simulate_byte_identical_across_threads(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "--preset", "a", "--threads", "1", "simulate", "--slots", "9000000", "--seed", "3", "--out", str(a), "--keys")
    run(capsys, "--preset", "a", "--threads", "4", "simulate", "--slots", "9000000", "--seed", "3", "--out", str(b), "--keys")
    for name in ("stats.json", "run0_alice.key", "run0_alice.key.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_with_preset_overrides_detector(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"clock_rate_hz": 1e9, "mean_photon_number": 0.2, "fiber_length_km": 100,
                               "detector": {"quantum_efficiency": 0.5, "dark_rate_hz": 0,
                                            "window_s": 1e-10}}))
    _, plain, _ = run(capsys, "analyze", "--config", str(cfg))
    _, over, _ = run(capsys, "analyze", "--config", str(cfg), "--preset", "b")
    _, ref, _ = run(capsys, "--preset", "b", "analyze", "--lengths", "100")
    assert plain != over
    assert over == ref


def test_attack(capsys):
    code, out, _ = run(capsys, "--preset", "a", "attack", "--fraction", "1", "--slots", "3000000", "--seed", "1")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["secure_rate"] == 0.0
    m = migration_probability(preset("a"))
    assert doc["oracle_induced_ber"] == pytest.approx(0.2575 * (1 - m) + 0.5 * m)
    assert doc["pns_fraction"] == pytest.approx(0.4 * (1 - 10 ** -0.4 * 0.036), rel=1e-3)


def test_attack_bad_fraction(capsys):
    assert run(capsys, "--preset", "a", "attack", "--fraction", "2")[0] == EXIT_CONFIG
