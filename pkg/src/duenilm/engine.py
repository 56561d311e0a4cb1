"""The DUE disaggregation pipeline.

Per day: remove standby (daily minimum) and the synchronised fridge wave,
test occupancy, then simulate the inhabitants' activity chains against the
remaining load.  Chains are redrawn until the unexplained energy falls below
a tolerance, keeping the best trial otherwise; teenagers' chains ignore the
load, adults' chains are filtered against it.  Whatever is left goes to
Standby, so the categories add up to the measured aggregate at every step.
"""

from __future__ import annotations

import configparser
import dataclasses
import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import (
    CATEGORIES,
    MEASUREMENT_STEP,
    Category,
    ConfigError,
    DataError,
    DisaggregationResult,
    HouseholdProfile,
    InvariantError,
    SampledSeries,
    resample,
)
from .pretreatment import (
    FridgeEstimate,
    extract_standby,
    learn_fridge,
    occupancy,
    subtract_fridge,
)
from .recognizer import (
    ACTIVITY_APPLIANCES,
    N_SLOTS,
    SLOT_MIN,
    DeviceStateVector,
    RecognitionContext,
    recognize_all,
)
from .sampler import MAX_FILTER_RETRIES, RandomSource, generate_chain
from .core import ActivityState as A
from .tou import SLOT_MINUTES, ActivityModel
from .validation import as_series, check_whole_days

log = logging.getLogger(__name__)

PERSON_CATEGORIES = (Category.COOKING, Category.ENTERTAINMENT, Category.HEATING,
                     Category.HOUSEKEEPING, Category.ICT, Category.LIGHT)
SLOT_HOURS = MEASUREMENT_STEP / 3600.0
OPTIMIZATION_MODES = ("sequential", "joint")


@dataclass(frozen=True)
class EngineConfig:
    """Engine parameters; the INI form is a single ``[engine]`` section with these keys."""

    tolerance: float = 0.15
    max_iterations: int = 20
    peak_delta: float = 100.0
    simulation_step: int = 60
    seed: int = 0
    residual_to_standby: bool = True
    max_filter_retries: int = MAX_FILTER_RETRIES
    optimization: str = "sequential"

    def __post_init__(self):
        if not 0.0 < self.tolerance <= 1.0:
            raise ConfigError("tolerance must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.peak_delta > 0:
            raise ConfigError("peak_delta must be positive")
        if self.simulation_step != 60:
            raise ConfigError("simulation_step is fixed at 60 s")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.max_filter_retries < 0:
            raise ConfigError("max_filter_retries must be >= 0")
        if self.optimization not in OPTIMIZATION_MODES:
            raise ConfigError(f"optimization must be one of {OPTIMIZATION_MODES}")

    @classmethod
    def parse(cls, text: str) -> "EngineConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed engine config: {exc}") from exc
        if not parser.has_section("engine"):
            return cls()
        sec = parser["engine"]
        kwargs = {}
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        for key in sec:
            if key not in fields:
                raise ConfigError(f"unknown engine option {key!r}")
            try:
                if key in ("tolerance", "peak_delta"):
                    kwargs[key] = sec.getfloat(key)
                elif key == "residual_to_standby":
                    kwargs[key] = sec.getboolean(key)
                elif key == "optimization":
                    kwargs[key] = sec.get(key).strip()
                else:
                    kwargs[key] = sec.getint(key)
            except ValueError as exc:
                raise ConfigError(f"engine option {key}: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EngineConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read engine config {path}: {exc}") from exc
        return cls.parse(text)

    def to_ini(self) -> str:
        lines = ["[engine]"]
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
        return "\n".join(lines) + "\n"


def implied_appliances(activity: A) -> tuple[str, ...]:
    """Appliances an activity implies for the compatibility check.

    Lighting is excluded, and so are TV and stereo unless the activity is
    about them, since those run in the background of almost anything.
    """
    out = []
    for name in ACTIVITY_APPLIANCES[activity]:
        if name == "lighting":
            continue
        if name in ("tv", "stereo") and activity not in (A.WATCHING_TV, A.MUSIC):
            continue
        out.append(name)
    return tuple(out)


def compatibility_filter(activity: A, window_max: float, household: HouseholdProfile) -> bool:
    """Reject an activity whose cheapest implied owned appliance exceeds the window's peak residual."""
    powers = [household.appliance(n).nominal_power for n in implied_appliances(activity)
              if household.owned(n) > 0]
    if not powers:
        return True
    return min(powers) <= window_max


def _window_max(residual: np.ndarray, start_slot: int, end_slot: int) -> float:
    lo = start_slot * SLOT_MINUTES // SLOT_MIN
    hi = -(-end_slot * SLOT_MINUTES // SLOT_MIN)
    return float(residual[lo:max(hi, lo + 1)].max())


@dataclass
class DayOutcome:
    result: DisaggregationResult
    states: DeviceStateVector
    context: Optional[RecognitionContext]
    chains: dict


def _day_rng(seed: int, date: dt.date) -> RandomSource:
    return RandomSource(seed).spawn(date.toordinal())


def disaggregate_day(day: SampledSeries, household: HouseholdProfile, model: ActivityModel,
                     config: EngineConfig = EngineConfig(), fridge: Optional[FridgeEstimate] = None,
                     states: Optional[DeviceStateVector] = None) -> DayOutcome:
    """Disaggregate one calendar day at 900 s."""
    if day.step != MEASUREMENT_STEP or not day.is_daily:
        raise DataError("a day must be one midnight-aligned calendar day on the 900 s grid")
    date = day.start.date()
    standby, r1 = extract_standby(day)
    if fridge is not None:
        sub = subtract_fridge(r1, fridge)
        fridge_part = sub.removed.values
        r2 = sub.residual.values
        clipped = sub.clipped_energy
    else:
        fridge_part = np.zeros(N_SLOTS)
        r2 = r1.values.copy()
        clipped = 0.0
    states = states.copy() if states is not None else DeviceStateVector()
    states.start_day(date)

    occupied = occupancy(r2, config.peak_delta)
    post_energy = float(r2.sum()) * SLOT_HOURS
    person_signals = {c: np.zeros(N_SLOTS) for c in PERSON_CATEGORIES}
    gaps: list[float] = []
    iterations = 0
    best_ctx = None
    chains: dict = {}
    leftover = r2
    if occupied:
        rng = _day_rng(config.seed, date)
        base = RecognitionContext.create(household, date, r2, rng.spawn(3), states, meal_rng=rng.spawn(0))
        persons = list(enumerate(household.persons))
        target = config.tolerance * post_energy
        if config.optimization == "joint":
            best_ctx, chains, gaps = _optimize(base, persons, date, model, config, rng, target, household, 0)
            iterations = len(gaps)
        else:
            best_ctx = base
            for stage, member in enumerate(persons):
                best_ctx, stage_chains, stage_gaps = _optimize(best_ctx, [member], date, model, config,
                                                               rng, target, household, stage)
                chains.update(stage_chains)
                gaps.extend(stage_gaps)
                iterations = max(iterations, len(stage_gaps))
        for c in PERSON_CATEGORIES:
            person_signals[c] = best_ctx.per_slot(c)
        leftover = best_ctx.residual
        states = best_ctx.states

    cats = {c: np.zeros(N_SLOTS) for c in CATEGORIES}
    cats[Category.FRIDGE] = fridge_part
    cats.update(person_signals)
    unassigned = None if config.residual_to_standby else leftover.copy()
    others = sum((cats[c] for c in CATEGORIES if c is not Category.STANDBY), np.zeros(N_SLOTS))
    if unassigned is not None:
        others = others + unassigned
    standby_values = day.values - others
    if np.any(standby_values < -1e-6):
        raise InvariantError(f"negative standby on {date}: {standby_values.min():.3g} W")
    cats[Category.STANDBY] = np.maximum(standby_values, 0.0)

    start = day.start
    result = DisaggregationResult(
        per_category={c: SampledSeries(start, MEASUREMENT_STEP, cats[c]) for c in CATEGORIES},
        occupancy={date: occupied},
        iterations={date: iterations},
        residual_energy={date: float(leftover.sum()) * SLOT_HOURS if config.residual_to_standby else 0.0},
        gaps={date: gaps},
        clipped_fridge_energy={date: clipped},
        unassigned=None if unassigned is None else SampledSeries(start, MEASUREMENT_STEP, unassigned),
    )
    return DayOutcome(result, states, best_ctx, chains)


def _optimize(start: RecognitionContext, persons: list, date: dt.date, model: ActivityModel,
              config: EngineConfig, rng: RandomSource, target: float, household: HouseholdProfile,
              stage: int) -> tuple[RecognitionContext, dict, list[float]]:
    """Redraw the chains of ``persons`` from ``start`` and keep the trial with the smallest gap.

    Stops early once the unexplained energy is at most ``target`` Wh.
    """
    best_ctx, best_gap, best_chains, gaps = None, float("inf"), {}, []
    for it in range(config.max_iterations):
        ctx = start.fork()
        trial_chains = {}
        for p, person in persons:
            accept = None if person.is_teenager else _make_filter(ctx, household)
            chain = generate_chain(model, person, date, rng.spawn(2, stage, it, p, 0), accept=accept,
                                   person_index=p, max_retries=config.max_filter_retries)
            ctx.rng = rng.spawn(2, stage, it, p, 1)
            recognize_all(ctx, chain, p)
            trial_chains[p] = chain
        gap = float(ctx.residual.sum()) * SLOT_HOURS
        gaps.append(gap)
        if best_ctx is None or gap < best_gap:
            best_ctx, best_gap, best_chains = ctx, gap, trial_chains
        if gap <= target:
            break
    return best_ctx, best_chains, gaps


def _make_filter(ctx: RecognitionContext, household: HouseholdProfile):
    def accept(activity: A, start_slot: int, end_slot: int) -> bool:
        return compatibility_filter(activity, _window_max(ctx.residual, start_slot, end_slot), household)
    return accept


def cold_appliance(household: HouseholdProfile):
    cold = household.cold_appliances()
    if sum(a.count for a in cold) > 1:
        raise ConfigError("only one cold appliance (fridge, fridge-freezer or freezer) is supported")
    return cold[0] if cold else None


def learn_household_fridge(series: SampledSeries, household: HouseholdProfile) -> Optional[FridgeEstimate]:
    """Fridge estimate from all nights of ``series``, or None if there is nothing to learn."""
    spec = cold_appliance(household)
    if spec is None:
        return None
    history = SampledSeries.concat([extract_standby(d)[1] for d in series.days()])
    try:
        return learn_fridge(history, spec)
    except DataError as exc:
        log.warning("fridge not learned, skipping fridge removal: %s", exc)
        return None


def _prepare(series) -> SampledSeries:
    series = as_series(series)
    if series.step != MEASUREMENT_STEP:
        series = resample(series, MEASUREMENT_STEP)
    return check_whole_days(series)


def disaggregate(series, household: HouseholdProfile, model: ActivityModel,
                 config: EngineConfig = EngineConfig(),
                 fridge: Union[FridgeEstimate, None, str] = "learn") -> DisaggregationResult:
    """Disaggregate whole days of aggregate load.

    The fridge is learned once over the full window unless an estimate is
    passed.  Weekly appliance counts carry over from one day to the next.
    """
    series = _prepare(series)
    if isinstance(fridge, str):
        fridge = learn_household_fridge(series, household)
    else:
        cold_appliance(household)
    states = None
    parts = []
    for day in series.days():
        out = disaggregate_day(day, household, model, config, fridge, states)
        parts.append(out.result)
        states = out.states
    return DisaggregationResult.concat(parts)


class DUEDisaggregator(BaseEstimator):
    """Unsupervised category disaggregation of a 15-minute aggregate.

    Parameters
    ----------
    household : HouseholdProfile
    model : ActivityModel
    tolerance, max_iterations, peak_delta, seed, residual_to_standby, optimization
        See :class:`EngineConfig`.

    ``fit`` needs no labels; it only learns the fridge cycle from the nights
    of the given aggregate.  ``predict`` returns a DataFrame with one column
    per category; diagnostics of the last call are kept in ``result_``.
    """

    def __init__(self, household=None, model=None, tolerance=0.15, max_iterations=20,
                 peak_delta=100.0, seed=0, residual_to_standby=True, optimization="sequential"):
        self.household = household
        self.model = model
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.peak_delta = peak_delta
        self.seed = seed
        self.residual_to_standby = residual_to_standby
        self.optimization = optimization

    def _config(self) -> EngineConfig:
        return EngineConfig(tolerance=self.tolerance, max_iterations=self.max_iterations,
                            peak_delta=self.peak_delta, seed=self.seed,
                            residual_to_standby=self.residual_to_standby,
                            optimization=self.optimization)

    def fit(self, X, y=None):
        if not isinstance(self.household, HouseholdProfile):
            raise ConfigError("household must be a HouseholdProfile")
        if not isinstance(self.model, ActivityModel):
            raise ConfigError("model must be an ActivityModel")
        self.config_ = self._config()
        series = _prepare(X)
        self.fridge_ = learn_household_fridge(series, self.household)
        return self

    def predict(self, X) -> pd.DataFrame:
        check_is_fitted(self, "config_")
        self.result_ = disaggregate(X, self.household, self.model, self.config_, fridge=self.fridge_)
        return self.result_.to_frame()

    def transform(self, X) -> np.ndarray:
        return self.predict(X).to_numpy()

    def fit_predict(self, X, y=None) -> pd.DataFrame:
        return self.fit(X).predict(X)
