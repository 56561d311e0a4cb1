"""Infer appliance pulses from one person's activity chain against a residual load.

Pulses are rectangles at nominal power on the 60 s grid.  The residual lives
on the 900 s grid; a pulse of power ``P`` that covers ``m`` minutes of a
15-minute slot needs ``P * m / 15`` W of residual in that slot and removes
exactly that much.  An infinite residual disables the budget, which is how
the forward simulator reuses this module.

Categories are processed in a fixed order per person:
Heating, Light, Cooking, Housekeeping, Entertainment, ICT.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    ACTIVITY_INDEX,
    CATEGORIES,
    MEASUREMENT_STEP,
    MINUTES_PER_DAY,
    ActivityState as A,
    ApplianceSpec,
    Category,
    ConfigError,
    HouseholdProfile,
    InvariantError,
)
from .sampler import ActivityChain, RandomSource

log = logging.getLogger(__name__)

SLOT_MIN = MEASUREMENT_STEP // 60
N_SLOTS = MINUTES_PER_DAY // SLOT_MIN
NEG_TOLERANCE = 1e-6

# Appliances that may be used during each activity.
ACTIVITY_APPLIANCES: dict[A, tuple[str, ...]] = {
    A.CLEANING: ("vacuum", "tv", "stereo", "lighting"),
    A.USING_COMPUTER: ("tv", "stereo", "pc", "laptop", "printer", "lighting"),
    A.COOKING: ("stove", "oven", "microwave", "kettle", "tv", "stereo", "lighting"),
    A.WASHING_DISHES: ("dishwasher", "tv", "stereo", "lighting"),
    A.EATING: ("coffee_maker", "microwave", "kettle", "tv", "stereo", "lighting"),
    A.HOMEWORK: ("tv", "stereo", "pc", "printer", "laptop", "lighting"),
    A.PLAYING_GAME: ("tv", "stereo", "gaming_console", "lighting"),
    A.LAUNDRY: ("washing_machine", "tumble_dryer", "tv", "stereo", "lighting"),
    A.MUSIC: ("stereo", "pc", "tablet", "laptop", "lighting"),
    A.OUTDOOR: (),
    A.SLEEPING: (),
    A.WATCHING_TV: ("tv", "dvd_player", "pc", "tablet", "laptop", "lighting"),
    A.SHOWERING: ("hairdryer", "tv", "stereo", "lighting"),
    A.WORKING: (),
}

NO_LIGHT = (A.SLEEPING, A.OUTDOOR, A.WORKING)
COOKING_APPLIANCES = {
    A.COOKING: ("stove", "oven", "microwave", "kettle"),
    A.EATING: ("coffee_maker", "microwave", "kettle"),
}
HOUSEKEEPING_APPLIANCES = {
    A.CLEANING: ("vacuum",),
    A.WASHING_DISHES: ("dishwasher",),
    A.LAUNDRY: ("washing_machine",),
}
# Programmes that run on their own once started; they may outlast the episode.
AUTONOMOUS = frozenset({"washing_machine", "tumble_dryer", "dishwasher"})
ENTERTAINMENT_APPLIANCES = ("tv", "stereo", "gaming_console", "pc", "laptop", "tablet")
PRIMARY_ACTIVITY = {
    "tv": A.WATCHING_TV, "stereo": A.MUSIC, "gaming_console": A.PLAYING_GAME,
    "pc": A.USING_COMPUTER, "laptop": A.USING_COMPUTER,
}
COMPUTERS = ("pc", "laptop")
TV_REPLACEMENTS = ("pc", "laptop", "tablet")
STUDY_ACTIVITIES = (A.WORKING, A.HOMEWORK)
DEFAULT_TAU = {"hairdryer": 5.0, "tablet": 20.0}

# Meal windows in minutes after midnight: breakfast, lunch, dinner.
MEAL_WINDOWS = ((5 * 60, 10 * 60), (11 * 60, 14 * 60 + 30), (17 * 60 + 30, 21 * 60 + 30))


def meal_index(minute: int) -> int:
    """Meal (1 breakfast, 2 lunch, 3 dinner) of an episode starting at ``minute``.

    Starts outside every window go to the nearest one; ties go to the earlier meal.
    """
    best, best_dist = 1, math.inf
    for i, (lo, hi) in enumerate(MEAL_WINDOWS, start=1):
        if lo <= minute < hi:
            return i
        dist = min(abs(minute - lo), abs(minute - hi),
                   abs(minute + MINUTES_PER_DAY - lo), abs(minute - MINUTES_PER_DAY - hi))
        if dist < best_dist:
            best, best_dist = i, dist
    return best


def sun_times(date: dt.date, latitude: float, longitude: float) -> tuple[float, float]:
    """Sunrise and sunset in minutes after local-standard-time midnight.

    Uses the cosine declination formula, an approximate equation of time and
    the standard -0.833 degree horizon.  The time zone is the nearest
    15-degree meridian.
    """
    if not abs(latitude) < 66.0:
        raise ConfigError(f"latitude {latitude} is polar; sunrise/sunset are undefined")
    n = date.timetuple().tm_yday
    decl = math.radians(23.44) * math.sin(math.radians(360.0 / 365.0 * (284 + n)))
    b = math.radians(360.0 / 365.0 * (n - 81))
    eot = 9.87 * math.sin(2 * b) - 7.53 * math.cos(b) - 1.5 * math.sin(b)
    lat = math.radians(latitude)
    cos_w = ((math.sin(math.radians(-0.833)) - math.sin(lat) * math.sin(decl))
             / (math.cos(lat) * math.cos(decl)))
    half = 4.0 * math.degrees(math.acos(min(1.0, max(-1.0, cos_w))))
    noon = 720.0 - 4.0 * (longitude - 15.0 * round(longitude / 15.0)) - eot
    return noon - half, noon + half


def dark_minutes(date: dt.date, latitude: float, longitude: float) -> np.ndarray:
    sunrise, sunset = sun_times(date, latitude, longitude)
    m = np.arange(MINUTES_PER_DAY)
    return (m < sunrise) | (m >= sunset)


@dataclass
class DeviceStateVector:
    """Busy intervals per appliance instance plus daily and weekly usage counts."""

    busy: dict[tuple[str, int], list[tuple[int, int]]] = field(default_factory=dict)
    day_counts: Counter = field(default_factory=Counter)
    week_counts: Counter = field(default_factory=Counter)
    week: Optional[tuple[int, int]] = None

    def start_day(self, date: dt.date) -> None:
        """Clear the day's bookings; weekly counts reset when the ISO week changes."""
        week = tuple(date.isocalendar())[:2]
        if week != self.week:
            self.week_counts = Counter()
            self.week = week
        self.busy = {}
        self.day_counts = Counter()

    def copy(self) -> "DeviceStateVector":
        return DeviceStateVector({k: list(v) for k, v in self.busy.items()},
                                 Counter(self.day_counts), Counter(self.week_counts), self.week)

    def intervals(self, name: str, instance: int) -> list[tuple[int, int]]:
        return self.busy.get((name, instance), [])

    def overlaps(self, name: str, instance: int, start: int, end: int) -> bool:
        return any(a < end and start < b for a, b in self.intervals(name, instance))

    def any_on(self, names: Sequence[str], start: int, end: int, counts: dict[str, int]) -> bool:
        return any(self.overlaps(n, i, start, end) for n in names for i in range(counts.get(n, 0)))

    def book(self, name: str, instance: int, start: int, end: int) -> None:
        if self.overlaps(name, instance, start, end):
            raise InvariantError(f"{name}#{instance} double-booked at [{start}, {end})")
        self.busy.setdefault((name, instance), []).append((start, end))
        self.day_counts[name] += 1
        self.week_counts[name] += 1


@dataclass(frozen=True)
class Pulse:
    appliance: str
    instance: int
    person: int
    start: int
    end: int
    power: float
    category: Category


@dataclass
class RecognitionContext:
    """Working state for one household-day: residual, bookings, emitted signals."""

    household: HouseholdProfile
    date: dt.date
    residual: np.ndarray
    states: DeviceStateVector
    rng: RandomSource
    sunrise: float = 0.0
    sunset: float = float(MINUTES_PER_DAY)
    lunch_at_home: bool = True
    dinner_at_home: bool = True
    signals: dict[Category, np.ndarray] = field(default_factory=dict)
    pulses: list[Pulse] = field(default_factory=list)
    clipped: float = 0.0

    def __post_init__(self):
        self.residual = np.array(self.residual, dtype=float)
        if self.residual.shape != (N_SLOTS,):
            raise ValueError(f"residual must have {N_SLOTS} samples")
        if np.any(self.residual < 0):
            raise InvariantError("residual must be non-negative")
        for cat in CATEGORIES:
            self.signals.setdefault(cat, np.zeros(MINUTES_PER_DAY))
        self._owned = {a.name: a for a in self.household.owned_specs()}
        self._counts = {a.name: a.count for a in self.household.owned_specs()}

    @classmethod
    def create(cls, household: HouseholdProfile, date: dt.date, residual, rng: RandomSource,
               states: Optional[DeviceStateVector] = None, meal_rng: Optional[RandomSource] = None
               ) -> "RecognitionContext":
        """Context with sun times and the day's lunch/dinner-at-home draws filled in."""
        if states is None:
            states = DeviceStateVector()
            states.start_day(date)
        sunrise, sunset = sun_times(date, household.latitude, household.longitude)
        meal_rng = meal_rng or rng
        habits = household.habits
        lunch = meal_rng.bernoulli(habits.lunches_at_home / 7.0)
        dinner = meal_rng.bernoulli(habits.dinners_at_home / 7.0)
        return cls(household, date, residual, states, rng, sunrise, sunset, lunch, dinner)

    def fork(self, rng: Optional[RandomSource] = None) -> "RecognitionContext":
        """Independent copy (residual, bookings, signals) for a trial iteration."""
        return RecognitionContext(
            self.household, self.date, self.residual.copy(), self.states.copy(),
            rng or self.rng, self.sunrise, self.sunset, self.lunch_at_home, self.dinner_at_home,
            {c: v.copy() for c, v in self.signals.items()}, list(self.pulses), self.clipped,
        )

    def owned(self, name: str) -> Optional[ApplianceSpec]:
        return self._owned.get(name)

    def dark(self) -> np.ndarray:
        m = np.arange(MINUTES_PER_DAY)
        return (m < self.sunrise) | (m >= self.sunset)

    def per_slot(self, category: Category) -> np.ndarray:
        return self.signals[category].reshape(N_SLOTS, SLOT_MIN).mean(axis=1)

    def emit(self, spec: ApplianceSpec, instance: int, person: int, start: int, end: int) -> Pulse:
        power = spec.nominal_power
        self.states.book(spec.name, instance, start, end)
        self.signals[spec.category][start:end] += power
        k = start // SLOT_MIN
        while k * SLOT_MIN < end:
            overlap = min(end, (k + 1) * SLOT_MIN) - max(start, k * SLOT_MIN)
            self._take(k, power * overlap / SLOT_MIN)
            k += 1
        pulse = Pulse(spec.name, instance, person, start, end, power, spec.category)
        self.pulses.append(pulse)
        return pulse

    def _take(self, k: int, amount: float) -> None:
        r = self.residual[k] - amount
        if r < 0:
            if r < -NEG_TOLERANCE:
                raise InvariantError(f"residual driven to {r:.3g} W in slot {k}")
            self.clipped += -r
            r = 0.0
        self.residual[k] = r


def capacity(residual: np.ndarray, power: float, start: int, bound: int) -> int:
    """Longest run (minutes) from ``start`` that the residual can carry at ``power``."""
    length = 0
    m = start
    while m < bound:
        k = m // SLOT_MIN
        slot_end = min((k + 1) * SLOT_MIN, bound)
        portion = slot_end - m
        cap = SLOT_MIN * residual[k] / power
        if cap + 1e-9 >= portion:
            length += portion
            m = slot_end
        else:
            length += int(math.floor(cap + 1e-9))
            break
    return length


def _free_bound(intervals: list[tuple[int, int]], start: int, limit: int) -> Optional[int]:
    for a, b in intervals:
        if a <= start < b:
            return None
        if start < a < limit:
            limit = a
    return limit


def find_window(residual: np.ndarray, power: float, earliest: int, latest_start: int,
                duration: int, limit: int, busy: list[tuple[int, int]] = (),
                step: int = 5, shrink: bool = True) -> Optional[tuple[int, int]]:
    """Earliest admissible window for a pulse.

    Starts are tried every ``step`` minutes in ``[earliest, latest_start]``;
    the pulse must end by ``limit`` and avoid ``busy``.  Without a start that
    fits ``duration`` the longest feasible run is used, provided it is at
    least half of ``duration``.
    """
    best_len, best_start = 0, None
    for s in range(earliest, min(latest_start, limit - 1) + 1, step):
        bound = _free_bound(list(busy), s, limit)
        if bound is None:
            continue
        n = capacity(residual, power, s, min(bound, s + duration))
        if n >= duration:
            return s, s + duration
        if n > best_len:
            best_len, best_start = n, s
    if shrink and best_start is not None and best_len >= max(1, math.ceil(duration / 2)):
        return best_start, best_start + best_len
    return None


def draw_duration(rng: RandomSource, tau: Optional[float], max_len: int) -> int:
    """Usage length in minutes: normal(tau, tau/4) rounded and clipped to [1, max_len]."""
    if max_len < 1:
        return 0
    if not tau:
        return max_len
    d = int(round(rng.normal(tau, tau / 4.0)))
    return max(1, min(max_len, d))


def _tau(spec: ApplianceSpec) -> Optional[float]:
    return spec.tau if spec.tau else DEFAULT_TAU.get(spec.name)


def _try_pulse(ctx: RecognitionContext, spec: ApplianceSpec, instance: int, person: int,
               beta: float, start: int, end: int, limit: Optional[int] = None,
               latest_start: Optional[int] = None) -> Optional[Pulse]:
    """Bernoulli gate, duration draw and placement of one appliance instance."""
    if not ctx.rng.bernoulli(beta):
        return None
    limit = end if limit is None else limit
    latest = end - 1 if latest_start is None else latest_start
    duration = draw_duration(ctx.rng, _tau(spec), limit - start)
    if duration < 1:
        return None
    win = find_window(ctx.residual, spec.nominal_power, start, latest, duration, limit,
                      ctx.states.intervals(spec.name, instance))
    if win is None:
        return None
    return ctx.emit(spec, instance, person, *win)


def recognize_heating(ctx: RecognitionContext, chain: ActivityChain, person: int) -> None:
    """Hairdryer use during showers of at least 5 minutes."""
    spec = ctx.owned("hairdryer")
    if spec is None:
        return
    for _, s, e in chain.episodes(A.SHOWERING):
        if e - s < 5:
            continue
        for inst in range(spec.count):
            _try_pulse(ctx, spec, inst, person, spec.beta(1), s, e)


def add_lighting(ctx: RecognitionContext, chain: ActivityChain, person: int) -> None:
    """Lighting for awake, at-home minutes outside daylight.

    The first person of the household gets full nominal power and every other
    person the nominal power scaled by beta1.  A 15-minute slot is lit only
    when the residual can carry the whole slot's light energy.
    """
    spec = ctx.owned("lighting")
    if spec is None:
        return
    scale = 1.0 if person == 0 else (spec.beta1 if spec.beta1 is not None else 0.25)
    power = spec.nominal_power * scale
    if power <= 0:
        return
    acts = chain.minutes()
    no_light = np.isin(acts, [ACTIVITY_INDEX[a] for a in NO_LIGHT])
    on = ctx.dark() & ~no_light
    minutes_on = on.reshape(N_SLOTS, SLOT_MIN).sum(axis=1)
    need = power * minutes_on / SLOT_MIN
    ok = (minutes_on > 0) & (need <= ctx.residual + 1e-9)
    mask = on & np.repeat(ok, SLOT_MIN)
    if not mask.any():
        return
    ctx.signals[Category.LIGHT][mask] += power
    for k in np.flatnonzero(ok):
        ctx._take(int(k), float(need[k]))
    ctx.pulses.append(Pulse("lighting", 0, person, int(np.argmax(mask)),
                            int(MINUTES_PER_DAY - np.argmax(mask[::-1])), power, Category.LIGHT))


def recognize_cooking(ctx: RecognitionContext, chain: ActivityChain, person: int) -> None:
    """Cooking and Eating episodes: appliances in random order, beta by meal."""
    for act, s, e in chain.episodes(A.COOKING, A.EATING):
        meal = meal_index(s)
        at_home = {1: True, 2: ctx.lunch_at_home, 3: ctx.dinner_at_home}[meal]
        names = [n for n in COOKING_APPLIANCES[act] if ctx.owned(n)]
        for name in ctx.rng.permutation(names):
            spec = ctx.owned(name)
            beta = spec.beta(meal) if at_home else 0.0
            for inst in range(spec.count):
                _try_pulse(ctx, spec, inst, person, beta, s, e)


def housekeeping_beta(ctx: RecognitionContext, spec: ApplianceSpec) -> float:
    quota = ctx.household.habits.weekly_quota(spec.name)
    if quota is not None and ctx.states.week_counts[spec.name] >= quota:
        return 0.0
    return spec.beta(1) if ctx.states.day_counts[spec.name] == 0 else spec.beta(2)


def recognize_housekeeping(ctx: RecognitionContext, chain: ActivityChain, person: int) -> None:
    """Cleaning, WashingDishes and Laundry; a tumble dryer may follow a wash."""
    for act, s, e in chain.episodes(*HOUSEKEEPING_APPLIANCES):
        names = [n for n in HOUSEKEEPING_APPLIANCES[act] if ctx.owned(n)]
        for name in ctx.rng.permutation(names):
            spec = ctx.owned(name)
            for inst in range(spec.count):
                limit = MINUTES_PER_DAY if name in AUTONOMOUS else e
                pulse = _try_pulse(ctx, spec, inst, person, housekeeping_beta(ctx, spec), s, e, limit=limit)
                if pulse is not None and name == "washing_machine":
                    _tumble_dry(ctx, person, pulse.end)


def _tumble_dry(ctx: RecognitionContext, person: int, start: int) -> None:
    spec = ctx.owned("tumble_dryer")
    if spec is None or start >= MINUTES_PER_DAY:
        return
    for inst in range(spec.count):
        if _try_pulse(ctx, spec, inst, person, housekeeping_beta(ctx, spec), start,
                      MINUTES_PER_DAY, latest_start=start) is not None:
            return


def entertainment_beta(ctx: RecognitionContext, spec: ApplianceSpec, activity: A) -> float:
    """Base probability before the extra-instance rule and usage habits."""
    name = spec.name
    if activity is A.WATCHING_TV and name in TV_REPLACEMENTS and not ctx.owned("tv"):
        return spec.beta(3)
    if PRIMARY_ACTIVITY.get(name) is activity:
        return spec.beta(1)
    if name in COMPUTERS and activity in STUDY_ACTIVITIES:
        return spec.beta(2)
    if name in ACTIVITY_APPLIANCES[activity]:
        return spec.beta(2)
    return 0.0


def _entertainment_candidates(ctx: RecognitionContext, activity: A) -> list[str]:
    out = []
    for name in ENTERTAINMENT_APPLIANCES:
        if not ctx.owned(name):
            continue
        if name in ACTIVITY_APPLIANCES[activity] or (name in COMPUTERS and activity in STUDY_ACTIVITIES):
            out.append(name)
    return out


def add_entertainment(ctx: RecognitionContext, chain: ActivityChain, person: int) -> None:
    """One pulse per entertainment appliance type and episode.

    If another instance of the same appliance is already on during the
    episode, a free instance is used with beta3.  TV pulses drag along the
    TV box (beta1) and the DVD player (beta1 while watching TV, beta2 otherwise).
    """
    habits = ctx.household.habits
    for act, s, e in chain.episodes(*A):
        names = _entertainment_candidates(ctx, act)
        if not names:
            continue
        for name in ctx.rng.permutation(names):
            spec = ctx.owned(name)
            beta = entertainment_beta(ctx, spec, act)
            inst = 0
            if spec.count > 1:
                on = [i for i in range(spec.count) if ctx.states.overlaps(name, i, s, e)]
                free = [i for i in range(spec.count) if i not in on]
                if not free:
                    continue
                inst = free[0]
                if on:
                    beta = spec.beta(3)
            beta = min(1.0, beta * habits.usage_factor(name))
            pulse = _try_pulse(ctx, spec, inst, person, beta, s, e)
            if pulse is not None and name == "tv":
                _tv_followers(ctx, pulse, act, person)


def _tv_followers(ctx: RecognitionContext, tv: Pulse, activity: A, person: int) -> None:
    for name in ("tv_box", "dvd_player"):
        spec = ctx.owned(name)
        if spec is None:
            continue
        if name == "dvd_player" and activity is not A.WATCHING_TV:
            beta = spec.beta(2)
        else:
            beta = spec.beta(1)
        inst = min(tv.instance, spec.count - 1)
        if not ctx.rng.bernoulli(beta):
            continue
        if ctx.states.overlaps(name, inst, tv.start, tv.end):
            continue
        if capacity(ctx.residual, spec.nominal_power, tv.start, tv.end) >= tv.end - tv.start:
            ctx.emit(spec, inst, person, tv.start, tv.end)


def add_ict(ctx: RecognitionContext, chain: ActivityChain, person: int) -> None:
    """Printer: beta1 if a computer is on during the episode, else beta2 while working or studying."""
    spec = ctx.owned("printer")
    if spec is None:
        return
    for act, s, e in chain.episodes(A.USING_COMPUTER, A.HOMEWORK, A.WORKING):
        if ctx.states.any_on(COMPUTERS, s, e, ctx._counts):
            beta = spec.beta(1)
        elif act in STUDY_ACTIVITIES:
            beta = spec.beta(2)
        else:
            beta = 0.0
        for inst in range(spec.count):
            _try_pulse(ctx, spec, inst, person, beta, s, e)


SUBPROCESSES = (recognize_heating, add_lighting, recognize_cooking,
                recognize_housekeeping, add_entertainment, add_ict)


def recognize_all(ctx: RecognitionContext, chain: ActivityChain, person: int) -> RecognitionContext:
    """Run every category subprocess for one person, in order, updating ``ctx``."""
    for step in SUBPROCESSES:
        step(ctx, chain, person)
    return ctx
