"""Analytic rate engine and Monte Carlo simulator for differential phase shift QKD."""
from .detector import CALIBRATED_JITTER, DetectorModel, JitterModel
from .params import LinkBudget, SystemParams, link_budget, load_config, preset, store_config
from .rates import RateReport, optimize_mu, rate_report

__version__ = "0.1.0"
