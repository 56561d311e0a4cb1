"""Combinatorial optimisation (CO) baseline.

Training quantises each category's ground truth into at most ``K`` power
levels (0 always included).  Disaggregation picks, per timestep, the level
assignment whose sum is closest to the aggregate.  Ties go to the assignment
with fewer non-zero categories, then to the smaller tuple of level indices in
category order.  Errors are rounded to 9 decimals before comparison so that
ties do not depend on floating-point summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import CATEGORIES, Category, ConfigError, DataError, SampledSeries
from .validation import as_category_map, as_series

BASIS_HEADER = "# duenilm CO power basis v1"
ERROR_DECIMALS = 9


def lloyd_levels(values: np.ndarray, k: int, max_iter: int = 100) -> np.ndarray:
    """Sorted power levels from 1-D Lloyd clustering with 0 held fixed as a level.

    The ``k - 1`` free centroids start at evenly spaced quantiles of the
    positive samples, which keeps the result deterministic.
    """
    if k < 1:
        raise ConfigError("number of levels must be >= 1")
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise DataError("cannot learn levels from an empty series")
    if np.any(~np.isfinite(x)):
        raise DataError("series contains non-finite values")
    positive = x[x > 0]
    if k == 1 or positive.size == 0:
        return np.array([0.0])
    q = (2 * np.arange(k - 1) + 1) / (2.0 * (k - 1))
    centers = np.unique(np.quantile(positive, q))
    for _ in range(max_iter):
        levels = np.concatenate(([0.0], centers))
        label = np.argmin(np.abs(x[:, None] - levels[None, :]), axis=1)
        new = np.array([x[label == j + 1].mean() for j in range(len(centers)) if np.any(label == j + 1)])
        new = np.unique(new[new > 0])
        if new.shape == centers.shape and np.allclose(new, centers, rtol=0, atol=1e-9):
            centers = new
            break
        centers = new
        if centers.size == 0:
            break
    return np.concatenate(([0.0], centers))


@dataclass(frozen=True)
class PowerBasis:
    """Representative power levels per category; each level set is sorted and starts at 0."""

    levels: dict[Category, np.ndarray]

    def __post_init__(self):
        if not self.levels:
            raise DataError("a power basis needs at least one category")
        clean = {}
        for cat in CATEGORIES:
            if cat not in self.levels:
                continue
            lv = np.unique(np.asarray(self.levels[cat], dtype=float))
            if lv.size == 0 or lv[0] != 0.0 or np.any(lv < 0) or np.any(~np.isfinite(lv)):
                raise DataError(f"levels of {cat} must be finite, non-negative and include 0")
            clean[cat] = lv
        unknown = set(self.levels) - set(clean)
        if unknown:
            raise DataError(f"unknown categories in basis: {sorted(map(str, unknown))}")
        object.__setattr__(self, "levels", clean)

    @property
    def categories(self) -> list[Category]:
        return list(self.levels)

    @property
    def n_combinations(self) -> int:
        return math.prod(len(v) for v in self.levels.values())

    def to_text(self) -> str:
        lines = [BASIS_HEADER]
        for cat, lv in self.levels.items():
            lines.append(f"{cat}\t" + " ".join(repr(float(v)) for v in lv))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PowerBasis":
        lines = text.splitlines()
        if not lines or lines[0].strip() != BASIS_HEADER:
            raise DataError("not a CO power basis file (bad header)")
        levels = {}
        for no, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            name, _, rest = line.partition("\t")
            try:
                cat = Category(name.strip())
                values = [float(v) for v in rest.split()]
            except ValueError as exc:
                raise DataError(f"basis line {no}: {exc}") from None
            if cat in levels:
                raise DataError(f"basis line {no}: duplicate category {cat}")
            levels[cat] = np.array(values)
        return cls(levels)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PowerBasis":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read basis {path}: {exc}") from exc
        return cls.from_text(text)


def train_co(ground_truth: Mapping, n_levels: int = 3) -> PowerBasis:
    """Learn a :class:`PowerBasis` from per-category ground truth."""
    truth = as_category_map(ground_truth)
    return PowerBasis({cat: lloyd_levels(s.values, n_levels) for cat, s in truth.items()})


def _tie_order(index: np.ndarray) -> np.ndarray:
    """Row order of ``index`` (combinations x categories) by (non-zeros, index tuple)."""
    nnz = np.count_nonzero(index, axis=1)
    keys = [index[:, j] for j in range(index.shape[1] - 1, -1, -1)] + [nnz]
    return np.lexsort(keys)


def _combinations(sizes: list[int]) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(n, dtype=np.int32) for n in sizes], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _exhaustive(agg: np.ndarray, levels: list[np.ndarray]) -> np.ndarray:
    """Best combination index per timestep without a continuity penalty."""
    index = _combinations([len(lv) for lv in levels])
    index = index[_tie_order(index)]
    sums = sum(lv[index[:, j]] for j, lv in enumerate(levels))
    rounded = np.round(sums, ERROR_DECIMALS)
    # First combination (in tie order) per distinct sum.
    uniq, first = np.unique(rounded, return_index=True)
    rank = first
    pos = np.searchsorted(uniq, agg)
    lo = np.clip(pos - 1, 0, len(uniq) - 1)
    hi = np.clip(pos, 0, len(uniq) - 1)
    err_lo = np.round(np.abs(agg - uniq[lo]), ERROR_DECIMALS)
    err_hi = np.round(np.abs(agg - uniq[hi]), ERROR_DECIMALS)
    take_hi = (err_hi < err_lo) | ((err_hi == err_lo) & (rank[hi] < rank[lo]))
    best = np.where(take_hi, rank[hi], rank[lo])
    return index[best]


def _beam(target: float, levels: list[np.ndarray], order: list[int], width: int,
          prev: Optional[np.ndarray], penalty: float) -> np.ndarray:
    """Beam search over categories in ``order``; returns a level-index row in original order."""
    m = len(levels)
    rem_max = np.cumsum([levels[j].max() for j in order][::-1])[::-1]
    rem_max = np.append(rem_max, 0.0)
    beam = np.zeros((1, m), dtype=np.int32)
    partial = np.zeros(1)
    changes = np.zeros(1)
    for depth, j in enumerate(order):
        n = len(levels[j])
        beam = np.repeat(beam, n, axis=0)
        choice = np.tile(np.arange(n, dtype=np.int32), len(partial))
        beam[:, j] = choice
        partial = np.repeat(partial, n) + levels[j][choice]
        changes = np.repeat(changes, n)
        if prev is not None:
            changes = changes + (choice != prev[j])
        r = target - partial
        room = rem_max[depth + 1]
        bound = np.where(r < 0, -r, np.where(r > room, r - room, 0.0)) + penalty * changes
        score = np.round(bound, ERROR_DECIMALS)
        closeness = np.round(np.abs(r), ERROR_DECIMALS)
        keep = np.lexsort((closeness, score))[:width]
        beam, partial, changes = beam[keep], partial[keep], changes[keep]
    err = np.round(np.abs(target - partial) + penalty * changes, ERROR_DECIMALS)
    cand = np.flatnonzero(err == err.min())
    return beam[cand[_tie_order(beam[cand])[0]]]


def _with_penalty(agg: np.ndarray, levels: list[np.ndarray], penalty: float) -> np.ndarray:
    """Sequential exhaustive search with a level-change penalty."""
    index = _combinations([len(lv) for lv in levels])
    index = index[_tie_order(index)]
    sums = sum(lv[index[:, j]] for j, lv in enumerate(levels))
    out = np.empty((len(agg), len(levels)), dtype=np.int32)
    prev = None
    for t, a in enumerate(agg):
        err = np.abs(a - sums)
        if prev is not None:
            err = err + penalty * np.count_nonzero(index != prev, axis=1)
        k = int(np.argmin(np.round(err, ERROR_DECIMALS)))
        prev = out[t] = index[k]
    return out


def disaggregate_co(aggregate, basis: PowerBasis, continuity_penalty: float = 0.0,
                    beam_width: int = 1000, max_combinations: int = 10**7) -> dict[Category, SampledSeries]:
    """Per-category estimates for ``aggregate`` from ``basis``."""
    series = as_series(aggregate)
    if continuity_penalty < 0:
        raise ConfigError("continuity_penalty must be >= 0")
    if beam_width < 1:
        raise ConfigError("beam_width must be >= 1")
    cats = basis.categories
    levels = [basis.levels[c] for c in cats]
    agg = series.values
    if basis.n_combinations <= max_combinations:
        if continuity_penalty > 0:
            index = _with_penalty(agg, levels, continuity_penalty)
        else:
            index = _exhaustive(agg, levels)
    else:
        order = sorted(range(len(cats)), key=lambda j: (-levels[j].max(), j))
        index = np.empty((len(agg), len(cats)), dtype=np.int32)
        prev = None
        for t, a in enumerate(agg):
            prev = index[t] = _beam(float(a), levels, order, beam_width,
                                    prev if continuity_penalty > 0 else None, continuity_penalty)
    return {c: series.with_values(levels[j][index[:, j]]) for j, c in enumerate(cats)}


class CODisaggregator(BaseEstimator):
    """Supervised combinatorial-optimisation disaggregator.

    Parameters
    ----------
    n_levels : int
        Maximum number of power levels per category, 0 included.
    continuity_penalty : float
        Cost per category whose level changes between consecutive steps; 0 disables it.
    beam_width : int
        Beam width used when the number of combinations exceeds ``max_combinations``.
    max_combinations : int
        Largest search space that is enumerated exhaustively.
    """

    def __init__(self, n_levels=3, continuity_penalty=0.0, beam_width=1000, max_combinations=10**7):
        self.n_levels = n_levels
        self.continuity_penalty = continuity_penalty
        self.beam_width = beam_width
        self.max_combinations = max_combinations

    def fit(self, X=None, y=None):
        """Learn the power basis from per-category ground truth ``y``; ``X`` is not used."""
        if y is None:
            raise DataError("CO needs per-category ground truth to fit")
        if int(self.n_levels) < 1:
            raise ConfigError("n_levels must be >= 1")
        self.basis_ = train_co(y, int(self.n_levels))
        return self

    def predict(self, X) -> pd.DataFrame:
        check_is_fitted(self, "basis_")
        series = as_series(X)
        est = disaggregate_co(series, self.basis_, self.continuity_penalty, int(self.beam_width),
                              int(self.max_combinations))
        self.estimates_ = est
        index = pd.DatetimeIndex(series.times())
        return pd.DataFrame({str(c): s.values for c, s in est.items()}, index=index)
