"""Loading appliance-level datasets into 15-minute category series.

A dataset directory holds one ``<channel>.csv`` file per metered channel
(header ``timestamp,power``; timestamp in epoch seconds read as local wall
clock time, power in watts) and a channel map that assigns every channel to
an appliance and a category, or marks it ``ignore``.  Channels are averaged
over 15-minute slots, summed per category, and the aggregate is the sum of
the categories.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .core import (
    CATEGORIES,
    MEASUREMENT_STEP,
    SECONDS_PER_DAY,
    Category,
    ConfigError,
    DataError,
    HouseholdProfile,
    SampledSeries,
)
from .household import load_household as _load_household

log = logging.getLogger(__name__)

PathLike = Union[str, Path]
IGNORE = "ignore"
CHANNEL_MAP_COLUMNS = ("channel", "appliance", "category")
CHANNEL_COLUMNS = ("timestamp", "power")
MAX_FILL_SLOTS = 2
EPOCH = dt.datetime(1970, 1, 1)


@dataclass(frozen=True)
class ChannelEntry:
    channel: str
    appliance: str
    category: Optional[Category]

    @property
    def ignored(self) -> bool:
        return self.category is None


@dataclass(frozen=True)
class ChannelMap:
    """Channel name to appliance and category; ``category is None`` marks an ignored channel."""

    entries: tuple[ChannelEntry, ...]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.channel in seen:
                raise ConfigError(f"channel {e.channel!r} is mapped twice")
            seen.add(e.channel)

    @property
    def used(self) -> list[ChannelEntry]:
        return sorted((e for e in self.entries if not e.ignored), key=lambda e: e.channel)

    def categories(self) -> list[Category]:
        present = {e.category for e in self.used}
        return [c for c in CATEGORIES if c in present]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CHANNEL_MAP_COLUMNS)
        for e in self.entries:
            writer.writerow((e.channel, e.appliance, IGNORE if e.ignored else e.category.value))
        return buf.getvalue()


def parse_channel_map(text: str) -> ChannelMap:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CHANNEL_MAP_COLUMNS:
        raise ConfigError(f"channel map header must be {','.join(CHANNEL_MAP_COLUMNS)}")
    entries = []
    for no, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise ConfigError(f"channel map line {no}: expected 3 fields, got {len(row)}")
        channel, appliance, category = (x.strip() for x in row)
        if not channel:
            raise ConfigError(f"channel map line {no}: empty channel name")
        if category.lower() == IGNORE:
            cat = None
        else:
            try:
                cat = Category(category)
            except ValueError:
                raise ConfigError(f"channel map line {no}: unknown category {category!r}") from None
        entries.append(ChannelEntry(channel, appliance, cat))
    return ChannelMap(tuple(entries))


def load_channel_map(path: PathLike) -> ChannelMap:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read channel map {path}: {exc}") from exc
    return parse_channel_map(text)


def to_epoch(t: dt.datetime) -> int:
    """Epoch seconds of a naive local timestamp (the inverse of how channel files are read)."""
    return int((t - EPOCH).total_seconds())


def read_channel(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Epoch seconds and watts of one channel file, sorted by time.

    Raises DataError naming the first malformed line.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except FileNotFoundError:
        raise DataError(f"channel file {path} not found") from None
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"{path}: {exc}".replace("\n", " ")) from None
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: empty file, header {','.join(CHANNEL_COLUMNS)} expected") from None
    if tuple(c.strip() for c in frame.columns) != CHANNEL_COLUMNS:
        raise DataError(f"{path}: header must be {','.join(CHANNEL_COLUMNS)}")
    ts = pd.to_numeric(frame.iloc[:, 0].str.strip(), errors="coerce").to_numpy(dtype=float)
    power = pd.to_numeric(frame.iloc[:, 1].str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(ts) | ~np.isfinite(power) | (power < 0)
    if bad.any():
        i = int(np.argmax(bad))
        # The header is line 1; data row i is line i + 2 in files without blank lines.
        raise DataError(f"{path}: line {i + 2}: expected 'epoch_seconds,non-negative watts', "
                        f"got {frame.iloc[i, 0]!r},{frame.iloc[i, 1]!r}")
    order = np.argsort(ts, kind="stable")
    return ts[order], power[order]


def slot_means(ts: np.ndarray, power: np.ndarray, origin: int, n_slots: int,
               step: int = MEASUREMENT_STEP) -> np.ndarray:
    """Mean of the samples in each ``step`` slot from ``origin``; NaN where a slot has none."""
    k = np.floor((ts - origin) / step).astype(np.int64)
    inside = (k >= 0) & (k < n_slots)
    sums = np.bincount(k[inside], weights=power[inside], minlength=n_slots)
    counts = np.bincount(k[inside], minlength=n_slots)
    out = np.full(n_slots, np.nan)
    np.divide(sums, counts, out=out, where=counts > 0)
    return out


@dataclass(frozen=True)
class GapReport:
    filled_slots: int
    zeroed_slots: int
    filled_energy_wh: float
    degraded_days: tuple[int, ...]


def fill_gaps(values: np.ndarray, step: int = MEASUREMENT_STEP,
              max_fill: int = MAX_FILL_SLOTS) -> tuple[np.ndarray, GapReport]:
    """Fill NaN runs: short runs repeat the last value, long runs become 0 and degrade their days.

    A short run at the very start has no previous value and takes the next one.
    """
    v = np.asarray(values, dtype=float).copy()
    nan = np.isnan(v)
    per_day = SECONDS_PER_DAY // step
    filled = zeroed = 0
    energy = 0.0
    degraded = set()
    i = 0
    n = len(v)
    while i < n:
        if not nan[i]:
            i += 1
            continue
        j = i
        while j < n and nan[j]:
            j += 1
        length = j - i
        if length <= max_fill and (i > 0 or j < n):
            fill = v[i - 1] if i > 0 else v[j]
            v[i:j] = fill
            filled += length
            energy += fill * length * step / 3600.0
        else:
            v[i:j] = 0.0
            zeroed += length
            degraded.update(range(i // per_day, (j - 1) // per_day + 1))
        i = j
    return v, GapReport(filled, zeroed, energy, tuple(sorted(degraded)))


@dataclass
class Dataset:
    """Category ground truth and aggregate on the 15-minute grid."""

    per_category: dict[Category, SampledSeries]
    aggregate: SampledSeries
    channels: dict[str, SampledSeries] = field(default_factory=dict)
    degraded_days: tuple[dt.date, ...] = ()
    gaps: dict[str, GapReport] = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return self.aggregate.n_days

    def slice_days(self, first: int, count: int) -> "Dataset":
        start = self.aggregate.start.date() + dt.timedelta(days=first)
        days = {start + dt.timedelta(days=d) for d in range(count)}
        return Dataset(
            {c: s.slice_days(first, count) for c, s in self.per_category.items()},
            self.aggregate.slice_days(first, count),
            {k: s.slice_days(first, count) for k, s in self.channels.items()},
            tuple(d for d in self.degraded_days if d in days),
            self.gaps,
        )

    def valid_mask(self) -> np.ndarray:
        """True for timesteps on days that are not degraded."""
        per_day = self.aggregate.samples_per_day
        start = self.aggregate.start.date()
        bad = {(d - start).days for d in self.degraded_days}
        return np.repeat([d not in bad for d in range(self.n_days)], per_day)


def load_channels(directory: PathLike, channel_map: ChannelMap,
                  step: int = MEASUREMENT_STEP) -> Dataset:
    """Read and average all mapped channels of ``directory``.

    The time grid runs from the midnight before the earliest sample to the
    midnight after the latest one.
    """
    directory = Path(directory)
    used = channel_map.used
    if not used:
        raise ConfigError("channel map has no non-ignored channels")
    raw = {e.channel: read_channel(directory / f"{e.channel}.csv") for e in used}
    stamps = [ts for ts, _ in raw.values() if ts.size]
    if not stamps:
        raise DataError("no channel contains any sample")
    first = min(float(ts[0]) for ts in stamps)
    last = max(float(ts[-1]) for ts in stamps)
    origin = int(first // SECONDS_PER_DAY) * SECONDS_PER_DAY
    n_days = int(last // SECONDS_PER_DAY) - origin // SECONDS_PER_DAY + 1
    n_slots = n_days * SECONDS_PER_DAY // step
    start = EPOCH + dt.timedelta(seconds=origin)

    channels, gaps = {}, {}
    degraded = set()
    for e in used:
        ts, power = raw[e.channel]
        if ts.size == 0:
            log.warning("channel %s is empty; using a zero series", e.channel)
            values = np.zeros(n_slots)
            gaps[e.channel] = GapReport(0, 0, 0.0, ())
        else:
            values, report = fill_gaps(slot_means(ts, power, origin, n_slots, step), step)
            gaps[e.channel] = report
            degraded.update(report.degraded_days)
            if report.filled_slots or report.zeroed_slots:
                log.info("channel %s: %d slots forward-filled (%.1f Wh), %d slots zero-filled",
                         e.channel, report.filled_slots, report.filled_energy_wh, report.zeroed_slots)
        channels[e.channel] = SampledSeries(start, step, values)

    per_category = {}
    for cat in channel_map.categories():
        total = np.zeros(n_slots)
        for e in used:
            if e.category is cat:
                total = total + channels[e.channel].values
        per_category[cat] = SampledSeries(start, step, total)
    aggregate = np.zeros(n_slots)
    for s in per_category.values():
        aggregate = aggregate + s.values
    agg = SampledSeries(start, step, aggregate)
    days = tuple(start.date() + dt.timedelta(days=d) for d in sorted(degraded))
    return Dataset(per_category, agg, channels, days, gaps)


def default_split(n_days: int) -> tuple[int, int]:
    """Training and testing days in a 2:1 ratio."""
    if n_days < 2:
        raise DataError("need at least 2 days to split into training and testing")
    train = int(round(2 * n_days / 3))
    train = min(max(train, 1), n_days - 1)
    return train, n_days - train


def split_train_test(data: Union[SampledSeries, Dataset], train_days: Optional[int] = None,
                     test_days: Optional[int] = None):
    """Contiguous training window followed by the testing window.

    Without explicit lengths the whole series is split 2:1.
    """
    n = data.n_days
    if train_days is None and test_days is None:
        train_days, test_days = default_split(n)
    elif train_days is None:
        train_days = n - test_days
    elif test_days is None:
        test_days = n - train_days
    if train_days < 1 or test_days < 1:
        raise DataError("training and testing windows must each cover at least one day")
    if train_days + test_days > n:
        raise DataError(f"train ({train_days}) + test ({test_days}) days exceed the {n} days of data")
    return data.slice_days(0, train_days), data.slice_days(train_days, test_days)


def load_household(path: PathLike) -> HouseholdProfile:
    return _load_household(path)


def write_channel(path: PathLike, series: SampledSeries) -> None:
    """Write ``series`` in the raw channel format (one row per sample, integer epoch seconds)."""
    t0 = to_epoch(series.start)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp,power\n")
        for i, v in enumerate(series.values):
            fh.write(f"{t0 + i * series.step},{float(v)!r}\n")
