"""Activity-chain based disaggregation of 15-minute household load into appliance categories."""

from .co import CODisaggregator, PowerBasis, disaggregate_co, train_co
from .core import (
    Category,
    ConfigError,
    DataError,
    DisaggregationResult,
    DueError,
    HouseholdProfile,
    InvariantError,
    SampledSeries,
    resample,
)
from .engine import DUEDisaggregator, EngineConfig, disaggregate, disaggregate_day
from .household import bundled_profile, load_household
from .ingest import load_channel_map, load_channels, split_train_test
from .metrics import evaluate
from .simulate import simulate_household
from .tou import ActivityModel, parse_diary

__version__ = "0.1.0"

__all__ = [
    "ActivityModel",
    "CODisaggregator",
    "Category",
    "ConfigError",
    "DUEDisaggregator",
    "DataError",
    "DisaggregationResult",
    "DueError",
    "EngineConfig",
    "HouseholdProfile",
    "InvariantError",
    "PowerBasis",
    "SampledSeries",
    "bundled_profile",
    "disaggregate",
    "disaggregate_co",
    "disaggregate_day",
    "evaluate",
    "load_channel_map",
    "load_channels",
    "load_household",
    "parse_diary",
    "resample",
    "simulate_household",
    "split_train_test",
    "train_co",
]
