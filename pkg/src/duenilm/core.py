"""Domain types shared by every stage of the disaggregation pipeline.

Power series are carried by :class:`SampledSeries`, a uniformly sampled
real-power signal on one of three fixed grids:

    60 s   appliance pulse simulation
    300 s  activity chains (288 slots per day)
    900 s  smart-meter measurements (96 slots per day)

Timestamps are timezone-naive local wall-clock time.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

SIM_STEP = 60
ACTIVITY_STEP = 300
MEASUREMENT_STEP = 900
VALID_STEPS = (SIM_STEP, ACTIVITY_STEP, MEASUREMENT_STEP)

SECONDS_PER_DAY = 86400
SLOTS_PER_DAY = SECONDS_PER_DAY // ACTIVITY_STEP  # 288
MINUTES_PER_DAY = 1440


class DueError(Exception):
    """Base class of every error raised by this package."""


class ConfigError(DueError, ValueError):
    """Misconfiguration: bad parameters, malformed config or profile files."""


class DataError(DueError, ValueError):
    """Input data that violates a documented precondition."""


class InvariantError(DueError, RuntimeError):
    """An internal invariant was violated (a bug, not bad input)."""


class Category(str, enum.Enum):
    COOKING = "Cooking"
    ENTERTAINMENT = "Entertainment"
    FRIDGE = "Fridge"
    HEATING = "Heating"
    HOUSEKEEPING = "Housekeeping"
    ICT = "ICT"
    LIGHT = "Light"
    STANDBY = "Standby"

    def __str__(self) -> str:
        return self.value


class ActivityState(str, enum.Enum):
    CLEANING = "Cleaning"
    USING_COMPUTER = "UsingComputer"
    COOKING = "Cooking"
    WASHING_DISHES = "WashingDishes"
    EATING = "Eating"
    HOMEWORK = "Homework"
    PLAYING_GAME = "PlayingGame"
    LAUNDRY = "Laundry"
    MUSIC = "Music"
    OUTDOOR = "Outdoor"
    SLEEPING = "Sleeping"
    WATCHING_TV = "WatchingTV"
    SHOWERING = "Showering"
    WORKING = "Working"

    def __str__(self) -> str:
        return self.value

    @property
    def index(self) -> int:
        return ACTIVITY_INDEX[self]


ACTIVITIES: tuple[ActivityState, ...] = tuple(ActivityState)
ACTIVITY_INDEX = {a: i for i, a in enumerate(ACTIVITIES)}
N_ACTIVITIES = len(ACTIVITIES)
CATEGORIES: tuple[Category, ...] = tuple(Category)


class Employment(str, enum.Enum):
    FULL_TIME = "full-time"
    PART_TIME = "part-time"
    STUDENT = "student"
    RETIRED = "retired"
    UNEMPLOYED = "unemployed"

    def __str__(self) -> str:
        return self.value


class AgeGroup(str, enum.Enum):
    TEENAGER = "teenager"
    ADULT_ACTIVE = "adult-active"
    SENIOR_ACTIVE = "senior-active"
    SENIOR_INACTIVE = "senior-inactive"

    def __str__(self) -> str:
        return self.value


class DayType(str, enum.Enum):
    WEEKDAY = "weekday"
    SATURDAY = "saturday"
    SUNDAY = "sunday"

    def __str__(self) -> str:
        return self.value


class UsageLevel(str, enum.Enum):
    OCCASIONAL = "occasional"
    NORMAL = "normal"
    HIGH = "high"

    def __str__(self) -> str:
        return self.value

    @property
    def factor(self) -> float:
        return {"occasional": 0.5, "normal": 1.0, "high": 1.5}[self.value]


def day_type_of(date: dt.date) -> DayType:
    """Map a calendar date to its day type."""
    wd = date.weekday()
    if wd == 5:
        return DayType.SATURDAY
    if wd == 6:
        return DayType.SUNDAY
    return DayType.WEEKDAY


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """Uniformly sampled real-power series in watts.

    ``values`` is stored as a read-only float64 array.
    """

    start: dt.datetime
    step: int
    values: np.ndarray

    def __post_init__(self):
        if self.step not in VALID_STEPS:
            raise ConfigError(f"step must be one of {VALID_STEPS} s, got {self.step}")
        if isinstance(self.start, dt.date) and not isinstance(self.start, dt.datetime):
            object.__setattr__(self, "start", dt.datetime.combine(self.start, dt.time()))
        if self.start.tzinfo is not None:
            raise ConfigError("timestamps must be timezone-naive local time")
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise DataError("series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampledSeries):
            return NotImplemented
        return (self.start == other.start and self.step == other.step
                and np.array_equal(self.values, other.values))

    @property
    def end(self) -> dt.datetime:
        return self.start + dt.timedelta(seconds=self.step * len(self))

    @property
    def duration(self) -> int:
        return self.step * len(self)

    @property
    def samples_per_day(self) -> int:
        return SECONDS_PER_DAY // self.step

    @property
    def is_daily(self) -> bool:
        return self.duration == SECONDS_PER_DAY and self.start.time() == dt.time()

    @property
    def n_days(self) -> int:
        return self.duration // SECONDS_PER_DAY

    def energy_wh(self) -> float:
        return float(self.values.sum()) * self.step / 3600.0

    def times(self) -> list[dt.datetime]:
        delta = dt.timedelta(seconds=self.step)
        return [self.start + i * delta for i in range(len(self))]

    def with_values(self, values) -> "SampledSeries":
        return SampledSeries(self.start, self.step, values)

    def days(self) -> list["SampledSeries"]:
        """Split a midnight-aligned, whole-day series into daily series."""
        if self.start.time() != dt.time() or self.duration % SECONDS_PER_DAY:
            raise DataError("series must start at midnight and cover whole days")
        n = self.samples_per_day
        return [
            SampledSeries(self.start + dt.timedelta(days=d), self.step,
                          self.values[d * n:(d + 1) * n])
            for d in range(self.n_days)
        ]

    def slice_days(self, first: int, count: int) -> "SampledSeries":
        n = self.samples_per_day
        if first < 0 or count < 0 or (first + count) * n > len(self):
            raise DataError(f"day window [{first}, {first + count}) outside series of {self.n_days} days")
        return SampledSeries(self.start + dt.timedelta(days=first), self.step,
                             self.values[first * n:(first + count) * n])

    @classmethod
    def zeros(cls, start: dt.datetime, step: int, n: int) -> "SampledSeries":
        return cls(start, step, np.zeros(n))

    @classmethod
    def concat(cls, parts: Sequence["SampledSeries"]) -> "SampledSeries":
        if not parts:
            raise DataError("nothing to concatenate")
        step = parts[0].step
        for a, b in zip(parts, parts[1:]):
            if b.step != step or b.start != a.end:
                raise DataError("series are not contiguous")
        return cls(parts[0].start, step, np.concatenate([p.values for p in parts]))


def resample(series: SampledSeries, target_step: int) -> SampledSeries:
    """Down-sample by averaging consecutive blocks.

    The target step must be an integer multiple of the source step; a trailing
    partial block is an error because it would not preserve energy.
    """
    if target_step % series.step:
        raise ConfigError(f"target step {target_step} s is not a multiple of {series.step} s")
    ratio = target_step // series.step
    if len(series) % ratio:
        raise DataError(f"series length {len(series)} is not a multiple of the step ratio {ratio}")
    values = series.values.reshape(-1, ratio).mean(axis=1)
    return SampledSeries(series.start, target_step, values)


@dataclass(frozen=True)
class PersonProfile:
    employment: Employment
    age_group: AgeGroup

    def __post_init__(self):
        object.__setattr__(self, "employment", Employment(self.employment))
        object.__setattr__(self, "age_group", AgeGroup(self.age_group))

    @property
    def is_teenager(self) -> bool:
        return self.age_group is AgeGroup.TEENAGER


@dataclass(frozen=True)
class ApplianceSpec:
    """One appliance type: nominal power, usage probabilities and mean duration."""

    name: str
    category: Category
    nominal_power: float
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    beta3: Optional[float] = None
    tau: Optional[float] = None
    count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        if not self.nominal_power > 0:
            raise ConfigError(f"{self.name}: nominal power must be positive")
        for b in (self.beta1, self.beta2, self.beta3):
            if b is not None and not 0.0 <= b <= 1.0:
                raise ConfigError(f"{self.name}: usage probability {b} outside [0, 1]")
        if self.tau is not None and self.tau < 0:
            raise ConfigError(f"{self.name}: mean duration must be non-negative")
        if self.count < 0:
            raise ConfigError(f"{self.name}: count must be non-negative")

    def beta(self, i: int) -> float:
        """Usage probability ``beta_i``; absent values count as 0."""
        value = (self.beta1, self.beta2, self.beta3)[i - 1]
        return 0.0 if value is None else value


def _opt_float(text: str) -> Optional[float]:
    text = text.strip()
    return float(text) if text else None


def load_appliance_defaults(path=None) -> dict[str, ApplianceSpec]:
    """Read the appliance reference table (name, category, power, betas, tau)."""
    if path is None:
        handle = resources.files("duenilm").joinpath("data/appliances.csv").open("r", encoding="utf-8")
    else:
        handle = open(path, "r", encoding="utf-8", newline="")
    with handle:
        rows = list(csv.DictReader(handle))
    specs = {}
    for row in rows:
        spec = ApplianceSpec(
            name=row["name"],
            category=Category(row["category"]),
            nominal_power=float(row["nominal_power"]),
            beta1=_opt_float(row["beta1"]),
            beta2=_opt_float(row["beta2"]),
            beta3=_opt_float(row["beta3"]),
            tau=_opt_float(row["tau"]),
        )
        specs[spec.name] = spec
    return specs


APPLIANCE_DEFAULTS: Mapping[str, ApplianceSpec] = load_appliance_defaults()
COLD_APPLIANCES = ("fridge_freezer", "fridge", "freezer")


@dataclass(frozen=True)
class Habits:
    """Household habits; ``None`` weekly quotas mean unconstrained."""

    washing_machine_per_week: Optional[int] = None
    tumble_dryer_per_week: Optional[int] = None
    dishwasher_per_week: Optional[int] = None
    computer_usage: UsageLevel = UsageLevel.NORMAL
    tv_usage: UsageLevel = UsageLevel.NORMAL
    stereo_usage: UsageLevel = UsageLevel.NORMAL
    console_usage: UsageLevel = UsageLevel.NORMAL
    lunches_at_home: int = 7
    dinners_at_home: int = 7

    def __post_init__(self):
        for name in ("computer_usage", "tv_usage", "stereo_usage", "console_usage"):
            object.__setattr__(self, name, UsageLevel(getattr(self, name)))
        for name in ("washing_machine_per_week", "tumble_dryer_per_week", "dishwasher_per_week"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("lunches_at_home", "dinners_at_home"):
            if not 0 <= getattr(self, name) <= 7:
                raise ConfigError(f"{name} must be within 0..7")

    def weekly_quota(self, appliance: str) -> Optional[int]:
        return {
            "washing_machine": self.washing_machine_per_week,
            "tumble_dryer": self.tumble_dryer_per_week,
            "dishwasher": self.dishwasher_per_week,
        }.get(appliance)

    def usage_factor(self, appliance: str) -> float:
        level = {
            "pc": self.computer_usage,
            "laptop": self.computer_usage,
            "tablet": self.computer_usage,
            "tv": self.tv_usage,
            "stereo": self.stereo_usage,
            "gaming_console": self.console_usage,
        }.get(appliance)
        return 1.0 if level is None else level.factor


@dataclass(frozen=True)
class HouseholdProfile:
    persons: tuple[PersonProfile, ...]
    inventory: tuple[ApplianceSpec, ...]
    habits: Habits = field(default_factory=Habits)
    children_under_10: int = 0
    electrical_heating: bool = False
    latitude: float = 47.0
    longitude: float = 8.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "inventory", tuple(self.inventory))
        if not self.persons:
            raise ConfigError("a household needs at least one person")
        if self.electrical_heating:
            raise ConfigError("electrical space/water heating is not supported")
        if self.children_under_10 < 0:
            raise ConfigError("children_under_10 must be >= 0")
        names = [a.name for a in self.inventory]
        if len(set(names)) != len(names):
            raise ConfigError("appliance listed twice in inventory")

    def appliance(self, name: str) -> Optional[ApplianceSpec]:
        for spec in self.inventory:
            if spec.name == name:
                return spec
        return None

    def owned(self, name: str) -> int:
        spec = self.appliance(name)
        return 0 if spec is None else spec.count

    def owned_specs(self) -> list[ApplianceSpec]:
        return [a for a in self.inventory if a.count > 0]

    def cold_appliances(self) -> list[ApplianceSpec]:
        return [a for a in self.owned_specs() if a.name in COLD_APPLIANCES]

    def with_appliance(self, spec: ApplianceSpec) -> "HouseholdProfile":
        inventory = [a for a in self.inventory if a.name != spec.name] + [spec]
        return replace(self, inventory=tuple(inventory))


def make_inventory(counts: Mapping[str, int],
                   overrides: Optional[Mapping[str, Mapping[str, float]]] = None,
                   defaults: Mapping[str, ApplianceSpec] = APPLIANCE_DEFAULTS) -> tuple[ApplianceSpec, ...]:
    """Build an inventory from appliance counts on top of the reference table."""
    overrides = overrides or {}
    inventory = []
    for name, count in counts.items():
        if name not in defaults:
            raise ConfigError(f"unknown appliance {name!r}")
        spec = replace(defaults[name], count=int(count), **overrides.get(name, {}))
        inventory.append(spec)
    for name in overrides:
        if name not in counts:
            raise ConfigError(f"override for appliance {name!r} which is not in the inventory")
    return tuple(inventory)


@dataclass
class DisaggregationResult:
    """Per-category estimates on the 900 s grid plus per-day diagnostics."""

    per_category: dict[Category, SampledSeries]
    occupancy: dict[dt.date, bool] = field(default_factory=dict)
    iterations: dict[dt.date, int] = field(default_factory=dict)
    residual_energy: dict[dt.date, float] = field(default_factory=dict)
    gaps: dict[dt.date, list[float]] = field(default_factory=dict)
    clipped_fridge_energy: dict[dt.date, float] = field(default_factory=dict)
    unassigned: Optional[SampledSeries] = None

    def total(self) -> np.ndarray:
        total = np.zeros(len(next(iter(self.per_category.values()))))
        for cat in CATEGORIES:
            if cat in self.per_category:
                total = total + self.per_category[cat].values
        if self.unassigned is not None:
            total = total + self.unassigned.values
        return total

    def to_frame(self):
        import pandas as pd

        first = next(iter(self.per_category.values()))
        index = pd.DatetimeIndex(first.times(), name="timestamp")
        return pd.DataFrame({str(c): self.per_category[c].values for c in CATEGORIES
                             if c in self.per_category}, index=index)

    @classmethod
    def concat(cls, parts: Iterable["DisaggregationResult"]) -> "DisaggregationResult":
        parts = list(parts)
        merged = cls({c: SampledSeries.concat([p.per_category[c] for p in parts])
                      for c in parts[0].per_category})
        for p in parts:
            merged.occupancy.update(p.occupancy)
            merged.iterations.update(p.iterations)
            merged.residual_energy.update(p.residual_energy)
            merged.gaps.update(p.gaps)
            merged.clipped_fridge_energy.update(p.clipped_fridge_energy)
        if all(p.unassigned is not None for p in parts):
            merged.unassigned = SampledSeries.concat([p.unassigned for p in parts])
        return merged
