"""Synthetic time-of-use diaries with plausible daily rhythms.

This is a stand-in for a licensed survey.  Each person-day is built from a
fixed template with random timings:

* 00:00 activity drawn from :func:`midnight_distribution`.  A non-sleeping
  midnight activity lasts 30-90 min before the person goes to sleep.
* Sleep until a wake time: about 06:30 on weekdays for employed people and
  students, about 07:30 for retired/unemployed people, about 08:30 at weekends.
* Morning: Showering (80 % of days), then breakfast (Eating).
* Weekday daytime: full-time workers are Working until about 17:30 and
  part-time workers until about 12:30.  Students are Outdoor (school) until
  about 15:30, and teenagers then do Homework.  Everybody else fills the day
  with home activities and a cooked lunch.
* Evening: Cooking around 18:00, Eating, WashingDishes (60 %), then leisure
  blocks (WatchingTV, UsingComputer, Music, PlayingGame for teenagers) until
  24:00.

Evening leisure runs to midnight so that every Sleeping episode is a whole
night; this keeps the per-activity duration statistics unimodal.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .core import ActivityState as A
from .core import AgeGroup, DayType, Employment, SLOTS_PER_DAY, day_type_of
from .tou import ActivityEvent, SLOT_MINUTES, write_diary

DEFAULT_START = dt.date(2005, 10, 3)  # a Monday


def midnight_distribution(employment: Employment, age_group: AgeGroup,
                          day_type: DayType) -> dict[A, float]:
    """Probability of each activity at 00:00 for a stratum."""
    weekend = day_type is not DayType.WEEKDAY
    if age_group is AgeGroup.TEENAGER:
        if weekend:
            return {A.SLEEPING: 0.70, A.PLAYING_GAME: 0.15, A.USING_COMPUTER: 0.15}
        return {A.SLEEPING: 0.85, A.PLAYING_GAME: 0.05, A.USING_COMPUTER: 0.10}
    if weekend:
        return {A.SLEEPING: 0.85, A.WATCHING_TV: 0.10, A.MUSIC: 0.05}
    if employment in (Employment.FULL_TIME, Employment.PART_TIME):
        return {A.SLEEPING: 0.95, A.WATCHING_TV: 0.05}
    return {A.SLEEPING: 0.90, A.WATCHING_TV: 0.07, A.USING_COMPUTER: 0.03}


@dataclass(frozen=True)
class SyntheticDiaryConfig:
    """``persons`` maps (employment, age group) to the number of people to generate."""

    persons: Mapping[tuple[Employment, AgeGroup], int]
    days: int = 7
    start: dt.date = DEFAULT_START
    seed: int = 0

    def __post_init__(self):
        if self.days < 0:
            raise ValueError("days must be >= 0")
        for key, n in self.persons.items():
            if n < 0:
                raise ValueError(f"negative person count for {key}")


class _DayBuilder:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.cursor = 0
        self.blocks: list[tuple[A, int, int]] = []

    def slots(self, mean_min: float, sd_min: float, lo_min: float = 5) -> int:
        minutes = max(lo_min, self.rng.normal(mean_min, sd_min))
        return max(1, int(round(minutes / SLOT_MINUTES)))

    def clock(self, mean_min: float, sd_min: float) -> int:
        return int(round(self.rng.normal(mean_min, sd_min) / SLOT_MINUTES))

    def add(self, activity: A, length: int) -> None:
        end = min(SLOTS_PER_DAY, self.cursor + max(1, length))
        if end <= self.cursor:
            return
        if self.blocks and self.blocks[-1][0] is activity:
            self.blocks[-1] = (activity, self.blocks[-1][1], end)
        else:
            self.blocks.append((activity, self.cursor, end))
        self.cursor = end

    def until(self, activity: A, slot: int) -> None:
        if slot > self.cursor:
            self.add(activity, slot - self.cursor)

    def fill(self, choices: list[tuple[A, float, float]], stop: int) -> None:
        while self.cursor < stop:
            act, mean, sd = choices[self.rng.integers(len(choices))]
            self.add(act, min(self.slots(mean, sd), stop - self.cursor))

    def done(self) -> bool:
        return self.cursor >= SLOTS_PER_DAY


_HOME = [(A.CLEANING, 40, 10), (A.LAUNDRY, 30, 10), (A.USING_COMPUTER, 60, 20),
         (A.MUSIC, 45, 15), (A.WATCHING_TV, 60, 20), (A.OUTDOOR, 120, 30)]
_LEISURE = [(A.WATCHING_TV, 90, 30), (A.USING_COMPUTER, 60, 20), (A.MUSIC, 45, 15)]


def _person_day(rng: np.random.Generator, employment: Employment, age_group: AgeGroup,
                date: dt.date) -> list[tuple[A, int, int]]:
    day_type = day_type_of(date)
    weekend = day_type is not DayType.WEEKDAY
    teen = age_group is AgeGroup.TEENAGER
    b = _DayBuilder(rng)

    dist = midnight_distribution(employment, age_group, day_type)
    acts = list(dist)
    first = acts[int(rng.choice(len(acts), p=np.array([dist[a] for a in acts])))]
    if first is not A.SLEEPING:
        b.add(first, b.slots(60, 15, lo_min=30))

    if weekend:
        wake = b.clock(510, 45)
    elif employment in (Employment.FULL_TIME, Employment.PART_TIME, Employment.STUDENT):
        wake = b.clock(390, 20)
    else:
        wake = b.clock(450, 40)
    b.until(A.SLEEPING, max(wake, b.cursor + 48))

    if rng.random() < 0.8:
        b.add(A.SHOWERING, b.slots(12, 4))
    b.add(A.EATING, b.slots(20, 5, lo_min=10))

    lunch = [(A.COOKING, 35, 10), (A.EATING, 25, 5), (A.WASHING_DISHES, 15, 5)]
    if not weekend and employment is Employment.FULL_TIME:
        b.until(A.WORKING, b.clock(1050, 40))
    elif not weekend and employment is Employment.PART_TIME:
        b.until(A.WORKING, b.clock(750, 30))
        for act, mean, sd in lunch:
            b.add(act, b.slots(mean, sd))
    elif not weekend and employment is Employment.STUDENT:
        b.until(A.OUTDOOR, b.clock(930 if teen else 960, 30))
        if teen:
            b.add(A.HOMEWORK, b.slots(60, 20, lo_min=20))
    else:
        b.fill(_HOME, b.clock(720, 20))
        for act, mean, sd in lunch:
            b.add(act, b.slots(mean, sd))

    home = _HOME + ([(A.HOMEWORK, 60, 20), (A.PLAYING_GAME, 60, 20)] if teen else [])
    b.fill(home, b.clock(1080, 30))
    b.add(A.COOKING, b.slots(45, 15, lo_min=15))
    b.add(A.EATING, b.slots(30, 10, lo_min=10))
    if rng.random() < 0.6:
        b.add(A.WASHING_DISHES, b.slots(20, 5))
    leisure = _LEISURE + ([(A.PLAYING_GAME, 60, 20)] if teen else [])
    b.fill(leisure, SLOTS_PER_DAY)
    return b.blocks


def generate_diary_events(config: SyntheticDiaryConfig) -> list[ActivityEvent]:
    events = []
    person = 0
    for (employment, age_group), count in config.persons.items():
        employment, age_group = Employment(employment), AgeGroup(age_group)
        for _ in range(count):
            pid = f"p{person:04d}"
            for d in range(config.days):
                date = config.start + dt.timedelta(days=d)
                rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(person, d)))
                for act, s, e in _person_day(rng, employment, age_group, date):
                    events.append(ActivityEvent(pid, date, s, e, act, employment, age_group))
            person += 1
    return events


def generate_synthetic_diary(config: SyntheticDiaryConfig, seed: Optional[int] = None) -> str:
    """Diary file text; an empty string when no person-days are requested."""
    if seed is not None:
        config = SyntheticDiaryConfig(config.persons, config.days, config.start, seed)
    return write_diary(generate_diary_events(config))
