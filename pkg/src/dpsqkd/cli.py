"""Command-line entry point.

Examples::

    dpsqkd --preset b analyze --lengths 0:150:5 --out sweep.csv
    dpsqkd --preset a optimize-mu
    dpsqkd --preset a simulate --slots 100000000 --seed 7 --repeat 5 --out run_a
    dpsqkd --preset a attack --fraction 1 --slots 10000000 --seed 1

Exit codes: 0 success, 2 config error, 3 no secure rate, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import attacks, montecarlo, postproc, rates
from .params import PRESET_DETECTORS, ConfigError, link_budget, load_config, preset

log = logging.getLogger("dpsqkd")

EXIT_OK, EXIT_CONFIG, EXIT_NO_SECURE, EXIT_IO = 0, 2, 3, 4

SWEEP_COLUMNS = ["length_km", "mu_used", "sifted_rate", "ber", "ber_baseline", "ber_dark",
                 "ber_jitter", "tau", "secure_rate", "mode"]


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def parse_lengths(spec: str) -> list[float]:
    """``"start:stop:step"`` (stop included when on the grid) or ``"10,25,100"``."""
    try:
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(n)]
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad --lengths spec {spec!r}", EXIT_CONFIG) from None


def resolve_params(args):
    name = args.preset
    try:
        if args.config:
            p = load_config(args.config)
            if name:
                p = replace(p, detector=PRESET_DETECTORS[name])
            return p
        if name:
            return preset(name)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from exc
    except ConfigError as exc:
        raise CliError(f"config error: {exc}", EXIT_CONFIG) from exc
    raise CliError("give --config FILE and/or --preset {a,b}", EXIT_CONFIG)


def _report_dict(rep: rates.RateReport) -> dict:
    return {
        "mu": rep.mu,
        "transmittance": rep.transmittance,
        "sifted_rate": rep.sifted_rate,
        "error_rate": rep.error_rate,
        "error_budget": {"baseline": rep.error_budget[0], "dark": rep.error_budget[1],
                         "jitter": rep.error_budget[2]},
        "collision_prob_per_bit": rep.collision_prob_per_bit,
        "shrink_factor": rep.shrink_factor,
        "secure_rate": rep.secure_rate,
        "beyond_secure_distance": rep.beyond_secure_distance,
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write(path, text: str):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def sweep_rows(points, mode="analytic") -> list[dict]:
    rows = []
    for pt in points:
        r = pt.report
        rows.append({
            "length_km": pt.length_km, "mu_used": r.mu, "sifted_rate": r.sifted_rate,
            "ber": r.error_rate, "ber_baseline": r.error_budget[0], "ber_dark": r.error_budget[1],
            "ber_jitter": r.error_budget[2], "tau": r.shrink_factor, "secure_rate": r.secure_rate,
            "mode": mode,
        })
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def cmd_analyze(args) -> int:
    p = resolve_params(args)
    lengths = parse_lengths(args.lengths) if args.lengths else [p.fiber_length]
    try:
        points = rates.distance_sweep(p, lengths, optimize=args.optimize_mu)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    rows = sweep_rows(points)
    out = args.out
    text = _dump_json(rows) if out and out.endswith(".json") else rows_to_csv(rows)
    if out:
        _write(out, text)
        log.info("wrote %d rows to %s", len(rows), out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# |d log R / d log mu| at the reported optimum must stay below this
STATIONARITY_TOL = 1e-3


def cmd_optimize_mu(args) -> int:
    p = resolve_params(args)
    try:
        mu, rep = rates.optimize_mu(p)
    except rates.NoSecureRateError as exc:
        sys.stdout.write(_dump_json({"mu_star": None, "error": str(exc)}))
        return EXIT_NO_SECURE
    stat = rates.stationarity(replace(p, mean_photon_number=mu), mu)
    sys.stdout.write(_dump_json({
        "mu_star": mu,
        "report": _report_dict(rep),
        "stationarity": {"dlogR_dlogmu": stat, "tolerance": STATIONARITY_TOL,
                         "passed": bool(abs(stat) < STATIONARITY_TOL)},
    }))
    return EXIT_OK


def _mean_sd(values):
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "sd": float(a.std(ddof=1)) if len(a) > 1 else 0.0}


def cmd_simulate(args) -> int:
    p = resolve_params(args)
    lb = link_budget(p)
    outdir = Path(args.out) if args.out else None
    if outdir:
        try:
            outdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create {outdir}: {exc}", EXIT_IO) from exc
    e_pred, _ = rates.error_model(p, lb)
    runs = []
    for i in range(args.repeat):
        seed = args.seed + i
        run = montecarlo.simulate_run(p, args.slots, seed, threads=args.threads)
        entry = {"seed": seed, "stats": run.stats.to_dict()}
        if len(run.key) >= postproc.MIN_KEY_FOR_ESTIMATE:
            res = postproc.distill(run.key, p, lb.transmittance, sample_seed=seed, hash_seed=seed)
            entry["distill"] = {**res.sidecar(), "realized_ratio": res.realized_ratio,
                                "disclosed_count": res.disclosed_count, "empty": bool(res.empty)}
            if outdir and args.keys:
                postproc.write_key(res, outdir / f"run{i}_alice.key")
                postproc.write_key(replace(res, key=res.bob_key), outdir / f"run{i}_bob.key")
        if outdir and args.records:
            montecarlo.write_records_csv(run.records, outdir / f"run{i}_records.csv")
        runs.append(entry)
    doc = {
        "n_slots": args.slots,
        "repeat": args.repeat,
        "analytic": {"sifted_fraction": rates.click_probability(p, lb), "ber": e_pred},
        "runs": runs,
        "summary": {
            "sifted_fraction": _mean_sd([r["stats"]["sifted_fraction"] for r in runs]),
            "sifted_rate": _mean_sd([r["stats"]["sifted_fraction"] * p.clock_rate for r in runs]),
            "ber": _mean_sd([r["stats"]["ber"] for r in runs]),
        },
    }
    text = _dump_json(doc)
    if outdir:
        _write(outdir / "stats.json", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_attack(args) -> int:
    p = resolve_params(args)
    if not 0.0 <= args.fraction <= 1.0:
        raise CliError("--fraction must lie in [0, 1]", EXIT_CONFIG)
    _, st = attacks.simulate_intercept_resend(p, args.fraction, args.slots, args.seed, threads=args.threads)
    doc = st.to_dict()
    doc["oracle_induced_ber"] = attacks.intercept_resend_error_oracle(
        p.baseline_error, attacks.migration_probability(p))
    doc["pns_fraction"] = attacks.accounting(p).pns_fraction
    text = _dump_json(doc)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--preset", choices=sorted(PRESET_DETECTORS), default=argparse.SUPPRESS,
                        help="operating point; overrides the config's detector fields")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="dpsqkd", description=__doc__.split("\n")[0])
    ap.add_argument("--preset", choices=sorted(PRESET_DETECTORS))
    ap.add_argument("--threads", type=int, default=1, help="worker threads (does not change results)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="analytic rate sweep over fiber length")
    a.add_argument("--lengths", help='"start:stop:step" or comma list, km')
    a.add_argument("--optimize-mu", action="store_true")
    a.add_argument("--out", help="output file (.csv or .json); stdout CSV if omitted")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("optimize-mu", parents=[common], help="mean photon number maximising the secure rate")
    o.set_defaults(func=cmd_optimize_mu)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo link simulation")
    s.add_argument("--slots", type=int, default=10**7)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--repeat", type=int, default=1)
    s.add_argument("--out", help="output directory")
    s.add_argument("--keys", action="store_true", help="write distilled key files")
    s.add_argument("--records", action="store_true", help="write detection-record CSV")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("attack", parents=[common], help="intercept-resend attack simulation")
    k.add_argument("--fraction", type=float, required=True)
    k.add_argument("--slots", type=int, default=10**7)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out")
    k.set_defaults(func=cmd_attack)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if getattr(args, "repeat", 1) < 1 or getattr(args, "slots", 2) < 2:
        print("error: --repeat must be >= 1 and --slots >= 2", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    raise SystemExit(main())
