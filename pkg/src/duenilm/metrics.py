"""Disaggregation metrics: event accuracy/F-measure, RMSE, NDE, NEEA, EstAcc and energy shares.

Metrics that are undefined for an input (a truth with no energy, no positive
states) are returned as ``None`` and written as ``NA``; they are never NaN.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .core import CATEGORIES, Category, DataError, SampledSeries

ArrayLike = Union[np.ndarray, Sequence[float], SampledSeries]
DEFAULT_ON_THRESHOLD = 5.0


def _arr(x: ArrayLike) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, SampledSeries) else x, dtype=float)


def _pair(estimate: ArrayLike, truth: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    e, t = _arr(estimate), _arr(truth)
    if e.shape != t.shape:
        raise DataError(f"estimate and truth differ in shape: {e.shape} vs {t.shape}")
    return e, t


def rmse(estimate: ArrayLike, truth: ArrayLike) -> float:
    e, t = _pair(estimate, truth)
    if e.size == 0:
        raise DataError("empty series")
    return float(math.sqrt(np.mean((e - t) ** 2)))


def nde(estimate: ArrayLike, truth: ArrayLike) -> Optional[float]:
    e, t = _pair(estimate, truth)
    denom = float(np.sum(t * t))
    return None if denom == 0 else float(np.sum((e - t) ** 2)) / denom


def neea(estimate: ArrayLike, truth: ArrayLike) -> Optional[float]:
    e, t = _pair(estimate, truth)
    denom = float(np.sum(t))
    return None if denom == 0 else float(np.sum(np.abs(e - t))) / denom


def est_acc(estimate: ArrayLike, truth: ArrayLike) -> Optional[float]:
    """``1 - sum|e - t| / (2 sum t)``; 0.5 for an all-zero estimate."""
    e, t = _pair(estimate, truth)
    denom = 2.0 * float(np.sum(t))
    return None if denom == 0 else 1.0 - float(np.sum(np.abs(e - t))) / denom


def overall_est_acc(estimates: Mapping, truths: Mapping) -> Optional[float]:
    """Estimation accuracy pooled over every category present in ``truths``."""
    num = 0.0
    denom = 0.0
    for cat, truth in truths.items():
        t = _arr(truth)
        e = _arr(estimates[cat]) if cat in estimates else np.zeros_like(t)
        e, t = _pair(e, t)
        num += float(np.sum(np.abs(e - t)))
        denom += float(np.sum(t))
    return None if denom == 0 else 1.0 - num / (2.0 * denom)


def energy_shares(series: Mapping) -> dict:
    totals = {k: float(np.sum(_arr(v))) for k, v in series.items()}
    grand = sum(totals.values())
    if grand <= 0:
        raise DataError("total energy must be positive to compute shares")
    return {k: v / grand for k, v in totals.items()}


def energy_share_error(estimates: Mapping, truths: Mapping) -> dict:
    """Estimated minus true energy share per category, in percentage points."""
    s_hat = energy_shares(estimates)
    s = energy_shares(truths)
    return {k: 100.0 * (s_hat.get(k, 0.0) - s.get(k, 0.0)) for k in _ordered(set(s_hat) | set(s))}


def _ordered(keys):
    order = {c: i for i, c in enumerate(CATEGORIES)}
    return sorted(keys, key=lambda k: (order.get(k, len(order)), str(k)))


@dataclass(frozen=True)
class EventMetrics:
    acc: float
    precision: Optional[float]
    recall: Optional[float]
    f: Optional[float]
    tp: int
    fp: int
    fn: int
    tn: int


def event_counts(estimate: ArrayLike, truth: ArrayLike, threshold: float = DEFAULT_ON_THRESHOLD) -> tuple[int, int, int, int]:
    if not threshold > 0:
        raise ValueError("on-threshold must be positive")
    e, t = _pair(estimate, truth)
    eon, ton = e > threshold, t > threshold
    tp = int(np.sum(eon & ton))
    fp = int(np.sum(eon & ~ton))
    fn = int(np.sum(~eon & ton))
    tn = int(np.sum(~eon & ~ton))
    return tp, fp, fn, tn


def event_metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> EventMetrics:
    total = tp + fp + fn + tn
    if total == 0:
        raise DataError("no timesteps to score")
    precision = None if tp + fp == 0 else tp / (tp + fp)
    recall = None if tp + fn == 0 else tp / (tp + fn)
    if precision is None or recall is None:
        f = None
    elif precision + recall == 0:
        f = 0.0
    else:
        f = 2 * precision * recall / (precision + recall)
    return EventMetrics((tp + tn) / total, precision, recall, f, tp, fp, fn, tn)


def event_metrics(estimate: ArrayLike, truth: ArrayLike, threshold: float = DEFAULT_ON_THRESHOLD) -> EventMetrics:
    """On/off matching per timestep; a sample is on when it exceeds ``threshold`` W."""
    return event_metrics_from_counts(*event_counts(estimate, truth, threshold))


@dataclass
class CategoryMetrics:
    rmse: Optional[float]
    nde: Optional[float]
    neea: Optional[float]
    est_acc: Optional[float]
    share_est: Optional[float]
    share_true: Optional[float]
    ese: Optional[float]
    acc: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    f: Optional[float] = None


METRIC_COLUMNS = ("rmse", "nde", "neea", "est_acc", "share_est", "share_true", "ese",
                  "acc", "precision", "recall", "f")


@dataclass
class MetricReport:
    algorithm: str
    categories: dict[Category, CategoryMetrics] = field(default_factory=dict)
    overall_est_acc: Optional[float] = None

    def rows(self) -> list[list]:
        rows = []
        for cat in _ordered(self.categories):
            m = self.categories[cat]
            rows.append([self.algorithm, str(cat)] + [getattr(m, c) for c in METRIC_COLUMNS])
        rows.append([self.algorithm, "overall"] + [self.overall_est_acc if c == "est_acc" else None
                                                   for c in METRIC_COLUMNS])
        return rows

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "overall": {"est_acc": self.overall_est_acc},
            "categories": {str(c): asdict(self.categories[c]) for c in _ordered(self.categories)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def format_value(value) -> str:
    """Fixed formatting for report files: ``NA`` for unscored, 10 significant digits otherwise."""
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def reports_to_csv(reports: Sequence[MetricReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("algorithm", "category") + METRIC_COLUMNS)
    for report in reports:
        for row in report.rows():
            writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def evaluate(estimates: Mapping, truths: Mapping, algorithm: str = "",
             on_threshold: float = DEFAULT_ON_THRESHOLD, mask: Optional[np.ndarray] = None) -> MetricReport:
    """Full metric report for aligned per-category estimates and truths.

    ``mask`` selects the timesteps to score (e.g. excluding degraded days).
    """
    def pick(x):
        a = _arr(x)
        return a if mask is None else a[mask]

    est = {Category(k): pick(v) for k, v in estimates.items()}
    tru = {Category(k): pick(v) for k, v in truths.items()}
    s_hat = energy_shares(est) if sum(float(v.sum()) for v in est.values()) > 0 else {}
    s_true = energy_shares(tru) if sum(float(v.sum()) for v in tru.values()) > 0 else {}
    report = MetricReport(algorithm)
    for cat in _ordered(set(est) | set(tru)):
        t = tru.get(cat)
        e = est.get(cat)
        if e is None:
            e = np.zeros_like(t)
        if t is None:
            report.categories[cat] = CategoryMetrics(None, None, None, None, s_hat.get(cat), None, None)
            continue
        ev = event_metrics(e, t, on_threshold) if t.size else None
        share_est = s_hat.get(cat, 0.0) if s_hat else None
        share_true = s_true.get(cat) if s_true else None
        ese = None if share_est is None or share_true is None else 100.0 * (share_est - share_true)
        report.categories[cat] = CategoryMetrics(
            rmse=rmse(e, t), nde=nde(e, t), neea=neea(e, t), est_acc=est_acc(e, t),
            share_est=share_est, share_true=share_true, ese=ese,
            acc=ev.acc if ev else None, precision=ev.precision if ev else None,
            recall=ev.recall if ev else None, f=ev.f if ev else None,
        )
    report.overall_est_acc = overall_est_acc(est, tru)
    return report
