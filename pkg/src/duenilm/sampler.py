"""Random activity chains drawn from an :class:`~duenilm.tou.ActivityModel`.

Integers are drawn by inverse-CDF lookup: the first index ``n`` with
``eps <= F(n) / sum(f)`` where ``F`` is the cumulative weight and ``eps`` is
uniform on the open interval (0, 1).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .core import (
    ACTIVITIES,
    ACTIVITY_INDEX,
    SLOTS_PER_DAY,
    ActivityState,
    PersonProfile,
    day_type_of,
)
from .tou import SLOT_MINUTES, ActivityModel, Distribution, Stratum

MAX_FILTER_RETRIES = 5


class RandomSource:
    """Deterministic, splittable uniform stream.

    Streams are identified by ``(seed, key)``; :meth:`spawn` derives an
    independent child stream so that results for one (day, person) do not
    depend on the order in which others are processed.
    """

    def __init__(self, seed: int, key: Sequence[int] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key)))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, key={self.key})"

    def spawn(self, *key: int) -> "RandomSource":
        return RandomSource(self.seed, self.key + key)

    def uniform(self) -> float:
        """Uniform draw in the open interval (0, 1)."""
        while True:
            u = self._gen.random()
            if u > 0.0:
                return u

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def normal(self, mean: float, std: float) -> float:
        return float(self._gen.normal(mean, std)) if std > 0 else float(mean)

    def permutation(self, items: Sequence) -> list:
        order = self._gen.permutation(len(items))
        return [items[i] for i in order]


def sample_discrete(f, eps: float) -> int:
    """Index of the first cumulative weight reaching ``eps`` of the total."""
    w = np.asarray(f, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in the open interval (0, 1)")
    total = w.sum()
    if total <= 0:
        raise ValueError("all weights are zero")
    cdf = np.cumsum(w) / total
    n = int(np.searchsorted(cdf, eps, side="left"))
    # cdf[-1] may round to just below 1; fall back to the last positive weight
    return min(n, int(np.flatnonzero(w)[-1]))


def sample_duration(model: ActivityModel, stratum: Stratum, activity: ActivityState,
                    rng: RandomSource) -> int:
    """Episode length in minutes: normal(mean, std) on the 5-minute grid, at least 5."""
    stats, _ = model.duration(stratum, activity)
    x = rng.normal(stats.mean, stats.std)
    return max(SLOT_MINUTES, SLOT_MINUTES * int(round(x / SLOT_MINUTES)))


def activity_distribution(model: ActivityModel, stratum: Stratum,
                          current: Optional[tuple[ActivityState, int]]) -> Distribution:
    if current is None:
        return model.initial(stratum)
    activity, slot = current
    return model.transition(stratum, activity, slot)


def next_activity(model: ActivityModel, stratum: Stratum,
                  current: Optional[tuple[ActivityState, int]], rng: RandomSource) -> ActivityState:
    """Draw the activity at 00:00 (``current is None``) or after ``current`` ends at ``slot``."""
    dist = activity_distribution(model, stratum, current)
    return ACTIVITIES[sample_discrete(dist.probabilities, rng.uniform())]


@dataclass(frozen=True)
class ActivityChain:
    """One person's day as (activity, start slot, end slot) entries tiling [0, 288)."""

    person: int
    date: dt.date
    entries: tuple[tuple[ActivityState, int, int], ...]

    def __post_init__(self):
        cursor = 0
        for act, s, e in self.entries:
            if s != cursor or e <= s:
                raise ValueError(f"chain entries do not tile the day at slot {cursor}")
            cursor = e
        if cursor != SLOTS_PER_DAY:
            raise ValueError("chain does not cover the whole day")

    def __iter__(self) -> Iterator[tuple[ActivityState, int, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def slots(self) -> np.ndarray:
        """Activity index of every 5-minute slot."""
        out = np.empty(SLOTS_PER_DAY, dtype=np.int64)
        for act, s, e in self.entries:
            out[s:e] = ACTIVITY_INDEX[act]
        return out

    def minutes(self) -> np.ndarray:
        return np.repeat(self.slots(), SLOT_MINUTES)

    def episodes(self, *activities: ActivityState) -> list[tuple[ActivityState, int, int]]:
        """Entries whose activity is among ``activities``, as (activity, start minute, end minute)."""
        wanted = set(activities)
        return [(a, s * SLOT_MINUTES, e * SLOT_MINUTES) for a, s, e in self.entries if a in wanted]

    @classmethod
    def constant(cls, activity: ActivityState, date: dt.date, person: int = 0) -> "ActivityChain":
        return cls(person, date, ((ActivityState(activity), 0, SLOTS_PER_DAY),))


AcceptFn = Callable[[ActivityState, int, int], bool]


def generate_chain(model: ActivityModel, person: PersonProfile, day: dt.date, rng: RandomSource,
                   accept: Optional[AcceptFn] = None, person_index: int = 0,
                   max_retries: int = MAX_FILTER_RETRIES) -> ActivityChain:
    """Sample a chain covering ``day``.

    ``accept(activity, start_slot, end_slot)`` may veto a candidate episode;
    a vetoed draw is repeated up to ``max_retries`` times and the last draw is
    then taken regardless.  Episodes running past midnight are truncated.
    """
    stratum = Stratum(person.employment, person.age_group, day_type_of(day))
    entries: list[tuple[ActivityState, int, int]] = []
    slot = 0
    current: Optional[tuple[ActivityState, int]] = None
    while slot < SLOTS_PER_DAY:
        for attempt in range(max_retries + 1):
            act = next_activity(model, stratum, current, rng)
            minutes = sample_duration(model, stratum, act, rng)
            end = min(SLOTS_PER_DAY, slot + minutes // SLOT_MINUTES)
            if accept is None or attempt == max_retries or accept(act, slot, end):
                break
        if entries and entries[-1][0] is act:
            entries[-1] = (act, entries[-1][1], end)
        else:
            entries.append((act, slot, end))
        slot = end
        current = (act, slot)
    return ActivityChain(person_index, day, tuple(entries))
