"""Experiment configuration and the derived link budget.

Config files are JSON with SI base units::

    {
      "schema_version": 1,
      "clock_rate_hz": 1e9,
      "mean_photon_number": 0.2,
      "fiber_length_km": 100,
      "fiber_attenuation_db_per_km": 0.2,
      "extra_loss_db": 2.0,
      "baseline_error": 0.015,
      "ec_efficiency": 1.16,
      "detector": {
        "quantum_efficiency": 0.004,
        "dark_rate_hz": 350,
        "dead_time_s": 6e-8,
        "window_s": 1e-10,
        "jitter": {"gaussian_fwhm_s": 7.5e-11, "tail_fraction": 0.613, "tail_decay_s": 2.33e-10}
      }
    }
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .detector import CALIBRATED_JITTER, DetectorModel, JitterModel, effective_efficiency

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed config file or a violated parameter invariant."""


@dataclass(frozen=True)
class SystemParams:
    clock_rate: float
    mean_photon_number: float
    fiber_length: float
    detector: DetectorModel
    fiber_attenuation: float = 0.2
    extra_loss_db: float = 2.0
    baseline_error: float = 0.015
    ec_efficiency: float = 1.16

    def __post_init__(self):
        checks = [
            (self.clock_rate > 0, "clock_rate must be > 0"),
            (0.0 < self.mean_photon_number < 1.0, "mean_photon_number must satisfy 0 < mu < 1"),
            (self.fiber_length >= 0, "fiber_length must be >= 0"),
            (self.fiber_attenuation >= 0, "fiber_attenuation must be >= 0"),
            (self.extra_loss_db >= 0, "extra_loss_db must be >= 0"),
            (0.0 <= self.baseline_error < 0.5, "baseline_error must satisfy 0 <= e < 0.5"),
            (self.ec_efficiency >= 1.0, "ec_efficiency must be >= 1"),
            (self.detector.window <= self.slot * (1 + 1e-9), "detector window cannot exceed the slot period"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def slot(self) -> float:
        return 1.0 / self.clock_rate

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class LinkBudget:
    channel_transmission: float
    transmittance_no_window: float  # channel x raw quantum efficiency
    transmittance: float  # window-gated total efficiency
    signal_prob_per_slot: float
    dark_prob_per_window: float


def channel_transmission(p: SystemParams) -> float:
    return 10.0 ** (-(p.fiber_attenuation * p.fiber_length + p.extra_loss_db) / 10.0)


def link_budget(p: SystemParams) -> LinkBudget:
    ch = channel_transmission(p)
    T = ch * effective_efficiency(p.detector)
    return LinkBudget(
        channel_transmission=ch,
        transmittance_no_window=ch * p.detector.quantum_efficiency,
        transmittance=T,
        signal_prob_per_slot=p.mean_photon_number * T,
        dark_prob_per_window=p.detector.dark_prob_per_window,
    )


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"missing required key {ctx}{key!r}")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{ctx}{key!r} must be a number")
    if not math.isfinite(v):
        raise ConfigError(f"{ctx}{key!r} must be finite")
    return float(v)


def _optional(d: dict, key: str, default: float, ctx: str):
    return _require(d, key, ctx) if key in d else default


def params_from_dict(d: dict) -> SystemParams:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a JSON object")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    det = d.get("detector")
    if not isinstance(det, dict):
        raise ConfigError("missing required object 'detector'")
    jit = det.get("jitter")
    try:
        if jit is None:
            jitter = CALIBRATED_JITTER
        elif isinstance(jit, dict):
            jitter = JitterModel(
                gaussian_fwhm=_require(jit, "gaussian_fwhm_s", "detector.jitter."),
                tail_fraction=_require(jit, "tail_fraction", "detector.jitter."),
                tail_decay=_require(jit, "tail_decay_s", "detector.jitter."),
            )
        else:
            raise ConfigError("detector.jitter must be an object")
        detector = DetectorModel(
            quantum_efficiency=_require(det, "quantum_efficiency", "detector."),
            dark_rate=_require(det, "dark_rate_hz", "detector."),
            dead_time=_optional(det, "dead_time_s", 60e-9, "detector."),
            window=_require(det, "window_s", "detector."),
            jitter=jitter,
        )
        return SystemParams(
            clock_rate=_require(d, "clock_rate_hz", ""),
            mean_photon_number=_require(d, "mean_photon_number", ""),
            fiber_length=_require(d, "fiber_length_km", ""),
            fiber_attenuation=_optional(d, "fiber_attenuation_db_per_km", 0.2, ""),
            extra_loss_db=_optional(d, "extra_loss_db", 2.0, ""),
            baseline_error=_optional(d, "baseline_error", 0.015, ""),
            ec_efficiency=_optional(d, "ec_efficiency", 1.16, ""),
            detector=detector,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def params_to_dict(p: SystemParams) -> dict:
    det, jit = p.detector, p.detector.jitter
    return {
        "schema_version": SCHEMA_VERSION,
        "clock_rate_hz": p.clock_rate,
        "mean_photon_number": p.mean_photon_number,
        "fiber_length_km": p.fiber_length,
        "fiber_attenuation_db_per_km": p.fiber_attenuation,
        "extra_loss_db": p.extra_loss_db,
        "baseline_error": p.baseline_error,
        "ec_efficiency": p.ec_efficiency,
        "detector": {
            "quantum_efficiency": det.quantum_efficiency,
            "dark_rate_hz": det.dark_rate,
            "dead_time_s": det.dead_time,
            "window_s": det.window,
            "jitter": {
                "gaussian_fwhm_s": jit.gaussian_fwhm,
                "tail_fraction": jit.tail_fraction,
                "tail_decay_s": jit.tail_decay,
            },
        },
    }


def load_config(path) -> SystemParams:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return params_from_dict(raw)


def store_config(p: SystemParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(p), indent=2) + "\n", encoding="utf-8")


# The two detector operating points of the 1 GHz experiment.
PRESET_DETECTORS = {
    "a": DetectorModel(quantum_efficiency=0.06, dark_rate=98e3, window=200e-12),
    "b": DetectorModel(quantum_efficiency=0.004, dark_rate=350.0, window=100e-12),
}
PRESET_LENGTHS = {"a": 10.0, "b": 100.0}


def preset(name: str, **overrides) -> SystemParams:
    """Full parameter set for operating point ``'a'`` or ``'b'``."""
    try:
        det = PRESET_DETECTORS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; expected 'a' or 'b'") from None
    base = dict(clock_rate=1e9, mean_photon_number=0.2,
                fiber_length=PRESET_LENGTHS[name], detector=det)
    base.update(overrides)
    return SystemParams(**base)
