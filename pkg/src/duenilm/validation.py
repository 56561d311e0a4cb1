"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import datetime as dt
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd

from .core import CATEGORIES, VALID_STEPS, Category, DataError, SampledSeries

SeriesLike = Union[SampledSeries, pd.Series, pd.DataFrame]


def as_series(X: SeriesLike, step: Optional[int] = None, nonnegative: bool = True) -> SampledSeries:
    """Coerce a power signal to :class:`SampledSeries`.

    Accepts a ``SampledSeries``, a ``pd.Series`` with a regular
    ``DatetimeIndex``, or a one-column ``DataFrame``.
    """
    if isinstance(X, pd.DataFrame):
        if X.shape[1] != 1:
            raise DataError(f"expected a single power column, got {X.shape[1]}")
        X = X.iloc[:, 0]
    if isinstance(X, pd.Series):
        if not isinstance(X.index, pd.DatetimeIndex):
            raise DataError("power series needs a DatetimeIndex")
        if X.index.tz is not None:
            raise DataError("timestamps must be timezone-naive local time")
        if len(X) < 2 and step is None:
            raise DataError("cannot infer the step of a series shorter than 2 samples")
        diffs = np.diff(X.index.asi8) // 10**9 if len(X) > 1 else np.array([step])
        if not np.all(diffs == diffs[0]):
            raise DataError("power series is not uniformly sampled")
        inferred = int(diffs[0])
        if step is not None and inferred != step:
            raise DataError(f"expected a {step} s step, got {inferred} s")
        if inferred not in VALID_STEPS:
            raise DataError(f"step {inferred} s is not one of {VALID_STEPS}")
        values = X.to_numpy(dtype=float)
        series = SampledSeries(X.index[0].to_pydatetime(), inferred, values)
    elif isinstance(X, SampledSeries):
        series = X
        if step is not None and series.step != step:
            raise DataError(f"expected a {step} s step, got {series.step} s")
    else:
        raise DataError(f"unsupported power signal type {type(X).__name__}")
    if nonnegative and np.any(series.values < 0):
        raise DataError("power values must be non-negative")
    return series


def check_whole_days(series: SampledSeries) -> SampledSeries:
    if series.start.time() != dt.time():
        raise DataError("series must start at midnight")
    if series.duration % 86400 or series.n_days < 1:
        raise DataError("series must cover at least one whole day")
    return series


def as_category_map(y, step: Optional[int] = None) -> dict[Category, SampledSeries]:
    """Coerce per-category ground truth (mapping or DataFrame) to aligned series."""
    if isinstance(y, pd.DataFrame):
        y = {col: y[col] for col in y.columns}
    if not isinstance(y, Mapping) or not y:
        raise DataError("per-category data must be a non-empty mapping or DataFrame")
    out = {}
    for key, series in y.items():
        try:
            cat = Category(str(key))
        except ValueError:
            raise DataError(f"unknown category {key!r}") from None
        out[cat] = as_series(series, step)
    check_aligned(out.values())
    return {c: out[c] for c in CATEGORIES if c in out}


def check_aligned(series) -> None:
    series = list(series)
    first = series[0]
    for s in series[1:]:
        if s.start != first.start or s.step != first.step or len(s) != len(first):
            raise DataError("series are not aligned (start, step and length must match)")
