"""Agent-based single-asset market with adaptive expectations and confirmatory bias."""

from .engine import RunSummary, StepRecord, TimeSeries, init_market, measure_dispersion_slope, run, step
from .market import MarketState, Role, clearing_price, excess_fraction, price_step
from .params import ConfigError, Params
from .rng import RandomStream, ReplayStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "MarketState",
    "Params",
    "RandomStream",
    "ReplayStream",
    "Role",
    "RunSummary",
    "StepRecord",
    "TimeSeries",
    "clearing_price",
    "excess_fraction",
    "init_market",
    "measure_dispersion_slope",
    "price_step",
    "run",
    "step",
]
