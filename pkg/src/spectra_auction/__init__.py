"""Quantized, noise-aware spectrum auctions over binary symmetric channels."""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentPreset, SchemeConfig  # noqa: E402
from .grid import GridCdf, GridPrice, PriceGrid, median, prior_order_statistic, prior_uniform  # noqa: E402
from .harness import MetricSeries, efficiency_sweep, fer_experiment, run_preset, run_trials  # noqa: E402
from .schemes import RoundRecord, TrialResult, run_trial  # noqa: E402

__all__ = [
    "ConfigError", "ExperimentPreset", "SchemeConfig",
    "GridCdf", "GridPrice", "PriceGrid", "median", "prior_order_statistic", "prior_uniform",
    "MetricSeries", "efficiency_sweep", "fer_experiment", "run_preset", "run_trials",
    "RoundRecord", "TrialResult", "run_trial",
]
