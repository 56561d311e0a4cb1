"""Time-of-use diaries and the activity Markov model estimated from them.

Diaries are delimited text with a header row::

    person,employment,age_group,date,activity,start,end
    p1,full-time,adult-active,2005-10-03,Sleeping,00:00,07:00
    p1,full-time,adult-active,2005-10-03,Working,07:00,17:00
    p1,full-time,adult-active,2005-10-03,WatchingTV,17:00,24:00

One row per contiguous activity episode.  Times are ``HH:MM`` on the 5-minute
grid and ``24:00`` closes the day.  The episodes of one person-day must tile
the whole day.

The model keeps integer counts, so every probability is an exact ratio of
observed counts.  All counts are stratified by (employment, age group, day
type).
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, TextIO, Union

import numpy as np

from .core import (
    ACTIVITIES,
    ACTIVITY_INDEX,
    ACTIVITY_STEP,
    N_ACTIVITIES,
    SLOTS_PER_DAY,
    ActivityState,
    AgeGroup,
    ConfigError,
    DataError,
    DayType,
    Employment,
    day_type_of,
)

SLOT_MINUTES = ACTIVITY_STEP // 60
DIARY_COLUMNS = ("person", "employment", "age_group", "date", "activity", "start", "end")
MODEL_FORMAT = "duenilm-activity-model"


class DiaryError(DataError):
    pass


class Stratum(NamedTuple):
    employment: Employment
    age_group: AgeGroup
    day_type: DayType

    def __str__(self) -> str:
        return f"{self.employment.value}/{self.age_group.value}/{self.day_type.value}"


@dataclass(frozen=True, order=True)
class ActivityEvent:
    person: str
    date: dt.date
    start: int
    end: int
    activity: ActivityState
    employment: Employment
    age_group: AgeGroup

    def __post_init__(self):
        if not 0 <= self.start < self.end <= SLOTS_PER_DAY:
            raise DiaryError(f"invalid slots [{self.start}, {self.end}) for {self.person} on {self.date}")

    @property
    def day_type(self) -> DayType:
        return day_type_of(self.date)

    @property
    def stratum(self) -> Stratum:
        return Stratum(self.employment, self.age_group, self.day_type)

    @property
    def minutes(self) -> int:
        return (self.end - self.start) * SLOT_MINUTES


@dataclass(frozen=True)
class TransitionEvent:
    employment: Employment
    age_group: AgeGroup
    day_type: DayType
    from_activity: ActivityState
    to_activity: ActivityState
    slot: int

    @property
    def stratum(self) -> Stratum:
        return Stratum(self.employment, self.age_group, self.day_type)


def _parse_time(text: str, line: int) -> int:
    try:
        hh, mm = text.strip().split(":")
        minutes = int(hh) * 60 + int(mm)
    except ValueError:
        raise DiaryError(f"line {line}: bad time {text!r}") from None
    if not 0 <= minutes <= 1440 or minutes % SLOT_MINUTES:
        raise DiaryError(f"line {line}: time {text!r} is not on the 5-minute grid of one day")
    return minutes // SLOT_MINUTES


def _format_time(slot: int) -> str:
    minutes = slot * SLOT_MINUTES
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def diary_days(events: Iterable[ActivityEvent]) -> dict[tuple[str, dt.date], list[ActivityEvent]]:
    """Group events by person-day, each day sorted by start slot."""
    days: dict[tuple[str, dt.date], list[ActivityEvent]] = defaultdict(list)
    for ev in events:
        days[(ev.person, ev.date)].append(ev)
    for key in days:
        days[key].sort(key=lambda e: e.start)
    return dict(days)


def check_tiling(events: Iterable[ActivityEvent]) -> None:
    for (person, date), day in diary_days(events).items():
        cursor = 0
        for ev in day:
            if ev.start != cursor:
                kind = "gap" if ev.start > cursor else "overlap"
                raise DiaryError(f"{kind} in diary of person {person} on {date} at {_format_time(min(cursor, ev.start))}")
            cursor = ev.end
        if cursor != SLOTS_PER_DAY:
            raise DiaryError(f"gap in diary of person {person} on {date}: day ends at {_format_time(cursor)}")


def parse_diary(stream: Union[TextIO, str, Path]) -> list[ActivityEvent]:
    """Read a diary file and validate that every person-day tiles 00:00-24:00."""
    if isinstance(stream, (str, Path)):
        with open(stream, "r", encoding="utf-8", newline="") as fh:
            return parse_diary(fh)
    reader = csv.reader(stream)
    events = []
    header = None
    for line, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = [c.strip() for c in row]
            if tuple(header) != DIARY_COLUMNS:
                raise DiaryError(f"line {line}: expected header {','.join(DIARY_COLUMNS)}")
            continue
        if len(row) != len(DIARY_COLUMNS):
            raise DiaryError(f"line {line}: expected {len(DIARY_COLUMNS)} fields, got {len(row)}")
        person, employment, age_group, date, activity, start, end = (c.strip() for c in row)
        try:
            act = ActivityState(activity)
        except ValueError:
            raise DiaryError(f"line {line}: unknown activity {activity!r}") from None
        try:
            emp = Employment(employment)
            age = AgeGroup(age_group)
            day = dt.date.fromisoformat(date)
        except ValueError as exc:
            raise DiaryError(f"line {line}: {exc}") from None
        s, e = _parse_time(start, line), _parse_time(end, line)
        if s >= e:
            raise DiaryError(f"line {line}: episode ends before it starts")
        events.append(ActivityEvent(person, day, s, e, act, emp, age))
    check_tiling(events)
    return events


def write_diary(events: Sequence[ActivityEvent], stream: Optional[TextIO] = None) -> str:
    """Serialise events in diary format; returns the text (empty for no events)."""
    buf = io.StringIO(newline="")
    if events:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(DIARY_COLUMNS)
        for ev in sorted(events, key=lambda e: (e.person, e.date, e.start)):
            writer.writerow([ev.person, ev.employment.value, ev.age_group.value, ev.date.isoformat(),
                             ev.activity.value, _format_time(ev.start), _format_time(ev.end)])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def transition_events(events: Iterable[ActivityEvent]) -> list[TransitionEvent]:
    """Consecutive episodes of a person-day, keyed by the slot where one ends and the next starts."""
    out = []
    for day in diary_days(events).values():
        for a, b in zip(day, day[1:]):
            if a.end != b.start:
                raise DiaryError(f"episodes of {a.person} on {a.date} do not tile")
            out.append(TransitionEvent(a.employment, a.age_group, a.day_type,
                                       a.activity, b.activity, a.end))
    return out


def count_initial(events: Iterable[ActivityEvent]) -> dict[Stratum, np.ndarray]:
    counts: dict[Stratum, np.ndarray] = {}
    for ev in events:
        if ev.start == 0:
            row = counts.setdefault(ev.stratum, np.zeros(N_ACTIVITIES, dtype=np.int64))
            row[ACTIVITY_INDEX[ev.activity]] += 1
    return counts


def count_transitions(events: Iterable[ActivityEvent]) -> dict[Stratum, np.ndarray]:
    counts: dict[Stratum, np.ndarray] = {}
    for tr in transition_events(events):
        tensor = counts.get(tr.stratum)
        if tensor is None:
            tensor = counts[tr.stratum] = np.zeros((SLOTS_PER_DAY, N_ACTIVITIES, N_ACTIVITIES), dtype=np.int64)
        tensor[tr.slot, ACTIVITY_INDEX[tr.from_activity], ACTIVITY_INDEX[tr.to_activity]] += 1
    return counts


def count_durations(events: Iterable[ActivityEvent]) -> dict[Stratum, np.ndarray]:
    """Per stratum a (3, n_activities) int array: count, sum and sum of squares of minutes."""
    sums: dict[Stratum, np.ndarray] = {}
    for ev in events:
        acc = sums.setdefault(ev.stratum, np.zeros((3, N_ACTIVITIES), dtype=np.int64))
        i = ACTIVITY_INDEX[ev.activity]
        m = ev.minutes
        acc[0, i] += 1
        acc[1, i] += m
        acc[2, i] += m * m
    return sums


def _normalize_rows(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 0.0)
    return probs


def estimate_initial(events: Iterable[ActivityEvent]) -> dict[Stratum, np.ndarray]:
    """Midnight activity distribution per stratum.

    Strata without any episode starting at 00:00 are absent from the result;
    :meth:`ActivityModel.initial` resolves them through the fallback chain.
    """
    return {s: _normalize_rows(c) for s, c in count_initial(events).items()}


def estimate_transitions(events: Iterable[ActivityEvent]) -> dict[Stratum, np.ndarray]:
    """Per stratum a (288, 14, 14) array ``[slot, from, to]``.

    Rows with no observed departure are all zero, which marks them unobserved.
    Slot 0 is never populated.
    """
    return {s: _normalize_rows(c) for s, c in count_transitions(events).items()}


@dataclass(frozen=True)
class DurationStats:
    count: int
    mean: Optional[float]
    std: Optional[float]

    @classmethod
    def from_sums(cls, count: int, total: float, total_sq: float) -> "DurationStats":
        if count == 0:
            return cls(0, None, None)
        mean = total / count
        var = max(total_sq / count - mean * mean, 0.0)
        return cls(int(count), float(mean), float(np.sqrt(var)))


def estimate_durations(events: Iterable[ActivityEvent]) -> dict[tuple[Stratum, ActivityState], DurationStats]:
    """Mean and population standard deviation of episode length (minutes)."""
    out = {}
    for stratum, acc in count_durations(events).items():
        for i, act in enumerate(ACTIVITIES):
            out[(stratum, act)] = DurationStats.from_sums(int(acc[0, i]), float(acc[1, i]), float(acc[2, i]))
    return out


class Fallback(str, enum.Enum):
    OBSERVED = "observed"
    POOLED = "pooled"       # same employment/age group, all day types
    UNIFORM = "uniform"     # nothing observed for the employment/age group
    GLOBAL = "global"       # durations only: all strata pooled
    DEFAULT = "default"     # durations only: activity never observed


class Distribution(NamedTuple):
    probabilities: np.ndarray
    level: Fallback


DEFAULT_DURATION = DurationStats(0, 60.0, 30.0)


@dataclass(frozen=True, eq=False)
class ActivityModel:
    """Initial distributions, slot-dependent transition matrices and duration statistics.

    Construct with :meth:`from_events` or :meth:`load`.  Queries never fail:
    unobserved strata or rows fall back to the same employment/age group pooled
    over day types, then to a uniform distribution, and report the level used.
    """

    initial_counts: Mapping[Stratum, np.ndarray]
    transition_counts: Mapping[Stratum, np.ndarray]
    duration_sums: Mapping[Stratum, np.ndarray]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @classmethod
    def from_events(cls, events: Sequence[ActivityEvent]) -> "ActivityModel":
        events = list(events)
        check_tiling(events)
        return cls(count_initial(events), count_transitions(events), count_durations(events))

    @property
    def strata(self) -> list[Stratum]:
        keys = set(self.initial_counts) | set(self.transition_counts) | set(self.duration_sums)
        return sorted(keys, key=lambda s: (list(Employment).index(s.employment),
                                           list(AgeGroup).index(s.age_group),
                                           list(DayType).index(s.day_type)))

    def _pooled(self, kind: str, employment: Employment, age_group: AgeGroup) -> Optional[np.ndarray]:
        key = (kind, employment, age_group)
        if key not in self._cache:
            source = {"initial": self.initial_counts, "transitions": self.transition_counts,
                      "durations": self.duration_sums}[kind]
            parts = [source[Stratum(employment, age_group, d)] for d in DayType
                     if Stratum(employment, age_group, d) in source]
            self._cache[key] = sum(parts[1:], parts[0].copy()) if parts else None
        return self._cache[key]

    def initial(self, stratum: Stratum) -> Distribution:
        counts = self.initial_counts.get(stratum)
        if counts is not None and counts.sum() > 0:
            return Distribution(counts / counts.sum(), Fallback.OBSERVED)
        pooled = self._pooled("initial", stratum.employment, stratum.age_group)
        if pooled is not None and pooled.sum() > 0:
            return Distribution(pooled / pooled.sum(), Fallback.POOLED)
        return Distribution(np.full(N_ACTIVITIES, 1.0 / N_ACTIVITIES), Fallback.UNIFORM)

    def transition(self, stratum: Stratum, activity: ActivityState, slot: int) -> Distribution:
        if not 1 <= slot < SLOTS_PER_DAY:
            raise ValueError(f"transition slot must be within 1..{SLOTS_PER_DAY - 1}, got {slot}")
        i = ACTIVITY_INDEX[activity]
        tensor = self.transition_counts.get(stratum)
        if tensor is not None:
            row = tensor[slot, i]
            total = row.sum()
            if total > 0:
                return Distribution(row / total, Fallback.OBSERVED)
        pooled = self._pooled("transitions", stratum.employment, stratum.age_group)
        if pooled is not None:
            row = pooled[slot, i]
            total = row.sum()
            if total > 0:
                return Distribution(row / total, Fallback.POOLED)
        return Distribution(np.full(N_ACTIVITIES, 1.0 / N_ACTIVITIES), Fallback.UNIFORM)

    def duration(self, stratum: Stratum, activity: ActivityState) -> tuple[DurationStats, Fallback]:
        i = ACTIVITY_INDEX[activity]
        acc = self.duration_sums.get(stratum)
        if acc is not None and acc[0, i] > 0:
            return DurationStats.from_sums(*map(float, acc[:, i])), Fallback.OBSERVED
        pooled = self._pooled("durations", stratum.employment, stratum.age_group)
        if pooled is not None and pooled[0, i] > 0:
            return DurationStats.from_sums(*map(float, pooled[:, i])), Fallback.POOLED
        if "global_durations" not in self._cache:
            parts = list(self.duration_sums.values())
            self._cache["global_durations"] = sum(parts[1:], parts[0].copy()) if parts else None
        glob = self._cache["global_durations"]
        if glob is not None and glob[0, i] > 0:
            return DurationStats.from_sums(*map(float, glob[:, i])), Fallback.GLOBAL
        return DEFAULT_DURATION, Fallback.DEFAULT

    def transition_row_observed(self, stratum: Stratum, activity: ActivityState, slot: int) -> bool:
        tensor = self.transition_counts.get(stratum)
        return tensor is not None and tensor[slot, ACTIVITY_INDEX[activity]].sum() > 0

    def summary(self) -> list[dict]:
        """Per-stratum statistics for inspection."""
        rows = []
        for s in self.strata:
            init = self.initial_counts.get(s)
            trans = self.transition_counts.get(s)
            dur = self.duration_sums.get(s)
            n_diaries = int(init.sum()) if init is not None else 0
            n_trans = int(trans.sum()) if trans is not None else 0
            n_rows = int((trans.sum(axis=-1) > 0).sum()) if trans is not None else 0
            top = None
            if init is not None and init.sum() > 0:
                top = ACTIVITIES[int(np.argmax(init))].value
            rows.append({
                "stratum": str(s), "diaries": n_diaries, "transitions": n_trans,
                "observed_rows": n_rows, "episodes": int(dur[0].sum()) if dur is not None else 0,
                "midnight_mode": top,
            })
        return rows

    def to_dict(self) -> dict:
        strata = []
        for s in self.strata:
            entry = {"employment": s.employment.value, "age_group": s.age_group.value,
                     "day_type": s.day_type.value}
            if s in self.initial_counts:
                entry["initial"] = [int(x) for x in self.initial_counts[s]]
            if s in self.transition_counts:
                idx = np.argwhere(self.transition_counts[s] > 0)
                entry["transitions"] = [[int(t), int(a), int(b), int(self.transition_counts[s][t, a, b])]
                                        for t, a, b in idx]
            if s in self.duration_sums:
                acc = self.duration_sums[s]
                entry["durations"] = {"count": [int(x) for x in acc[0]], "sum": [int(x) for x in acc[1]],
                                      "sum_sq": [int(x) for x in acc[2]]}
            strata.append(entry)
        return {"format": MODEL_FORMAT, "version": 1, "slot_minutes": SLOT_MINUTES,
                "activities": [a.value for a in ACTIVITIES], "strata": strata}

    @classmethod
    def from_dict(cls, data: dict) -> "ActivityModel":
        if data.get("format") != MODEL_FORMAT or data.get("version") != 1:
            raise ConfigError("not an activity model file (format/version mismatch)")
        if data.get("activities") != [a.value for a in ACTIVITIES]:
            raise ConfigError("activity model uses a different activity set")
        initial, transitions, durations = {}, {}, {}
        for entry in data["strata"]:
            s = Stratum(Employment(entry["employment"]), AgeGroup(entry["age_group"]),
                        DayType(entry["day_type"]))
            if "initial" in entry:
                initial[s] = np.asarray(entry["initial"], dtype=np.int64)
            if "transitions" in entry:
                tensor = np.zeros((SLOTS_PER_DAY, N_ACTIVITIES, N_ACTIVITIES), dtype=np.int64)
                for t, a, b, c in entry["transitions"]:
                    tensor[t, a, b] = c
                transitions[s] = tensor
            if "durations" in entry:
                d = entry["durations"]
                durations[s] = np.asarray([d["count"], d["sum"], d["sum_sq"]], dtype=np.int64)
        return cls(initial, transitions, durations)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ActivityModel":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read activity model {path}: {exc}") from exc
        return cls.from_dict(data)
