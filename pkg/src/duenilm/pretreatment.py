"""Per-day pre-treatment: standby removal, fridge removal and occupancy detection."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    MEASUREMENT_STEP,
    MINUTES_PER_DAY,
    ApplianceSpec,
    ConfigError,
    DataError,
    SampledSeries,
)

log = logging.getLogger(__name__)

SLOT_MIN = MEASUREMENT_STEP // 60  # 15 minutes per measurement slot
NIGHT_START = 150                  # 02:30, start of the fridge learning window
NIGHT_END = 300                    # 05:00
DUTY_NIGHT = (22 * 60, 6 * 60)     # duty-cycle night (beta2) runs 22:00-06:00
CYCLE_RANGE = (30, 180)            # searched cycle lengths in minutes
HIST_BIN = 5.0                     # watts


def extract_standby(day: SampledSeries) -> tuple[float, SampledSeries]:
    """Standby is the minimum of the day; returns it and the day minus it."""
    standby = float(day.values.min())
    return standby, day.with_values(day.values - standby)


def update_nominal_power(p_old: float, fridge_mean: float, beta_night: float) -> float:
    """Rescale the fridge nominal power so that its night duty cycle matches ``fridge_mean``."""
    if beta_night <= 0:
        raise ConfigError("fridge night duty cycle must be positive")
    return p_old * fridge_mean / (p_old * beta_night)


def _window_means(length: int, on: int) -> np.ndarray:
    """Mean on-fraction of a 15-minute window starting at each offset of a cycle."""
    minutes = np.arange(length + SLOT_MIN)
    wave = ((minutes % length) < on).astype(float)
    csum = np.concatenate(([0.0], np.cumsum(wave)))
    return (csum[SLOT_MIN:SLOT_MIN + length] - csum[:length]) / SLOT_MIN


def square_wave(minutes: np.ndarray, length: int, on: int, phase: int) -> np.ndarray:
    """On/off indicator at absolute ``minutes`` for a cycle starting at ``phase``."""
    return (((minutes - phase) % length) < on).astype(float)


@dataclass(frozen=True)
class FridgeEstimate:
    """Fitted cold-appliance cycle.

    ``phase_offset`` is the start of a cycle in minutes after ``origin``
    (midnight of the first learning day); the wave is continuous in absolute
    time.  ``amplitude`` is the fitted on-power, ``nominal_power`` the updated
    inventory value.
    """

    nominal_power: float
    amplitude: float
    cycle_length: int
    active_duration: int
    day_active_duration: int
    phase_offset: int
    origin: dt.datetime
    night_mean: float
    nights_used: int

    def __post_init__(self):
        if not 0 < self.active_duration <= self.cycle_length:
            raise DataError("fridge active duration must lie within the cycle")
        if not self.nominal_power > 0:
            raise DataError("fridge nominal power must be positive")

    def minute_signal(self, date: dt.date, phase: Optional[int] = None) -> np.ndarray:
        """Fridge power at each minute of ``date`` (60 s grid)."""
        start = dt.datetime.combine(date, dt.time())
        offset = int((start - self.origin).total_seconds() // 60)
        minutes = offset + np.arange(MINUTES_PER_DAY)
        if phase is None:
            phase = self.phase_offset
        else:
            phase = offset + phase
        of_day = np.arange(MINUTES_PER_DAY)
        night = (of_day >= DUTY_NIGHT[0]) | (of_day < DUTY_NIGHT[1])
        on = np.where(night, square_wave(minutes, self.cycle_length, self.active_duration, phase),
                      square_wave(minutes, self.cycle_length, self.day_active_duration, phase))
        return self.amplitude * on

    def template(self, date: dt.date, phase: Optional[int] = None) -> SampledSeries:
        """The day's fridge signal averaged to the 900 s grid.

        ``phase`` overrides the learned offset; it is then counted in minutes
        after midnight of ``date``.
        """
        sig = self.minute_signal(date, phase).reshape(-1, SLOT_MIN).mean(axis=1)
        return SampledSeries(dt.datetime.combine(date, dt.time()), MEASUREMENT_STEP, sig)


def night_windows(history: SampledSeries) -> tuple[np.ndarray, np.ndarray]:
    """Per-night samples in 02:30-05:00 and the absolute start minute of each sample."""
    if history.step != MEASUREMENT_STEP:
        raise DataError("fridge learning expects the 900 s grid")
    days = history.days()
    first, last = NIGHT_START // SLOT_MIN, NIGHT_END // SLOT_MIN
    values = np.array([d.values[first:last] for d in days]).reshape(len(days), last - first)
    minutes = (np.arange(len(days))[:, None] * MINUTES_PER_DAY
               + np.arange(first, last)[None, :] * SLOT_MIN)
    return values, minutes


def quiet_nights(night_means: np.ndarray, bin_width: float = HIST_BIN) -> np.ndarray:
    """Mask of nights in the largest histogram cluster of per-night mean power.

    A cluster is a run of consecutive non-empty bins; the largest is the one
    holding the most nights (ties go to the lower power).
    """
    edges = np.floor(night_means / bin_width).astype(np.int64)
    bins, counts = np.unique(edges, return_counts=True)
    clusters: list[tuple[int, int, int]] = []  # (n nights, first bin, last bin)
    start = 0
    for i in range(1, len(bins) + 1):
        if i == len(bins) or bins[i] != bins[i - 1] + 1:
            clusters.append((int(counts[start:i].sum()), int(bins[start]), int(bins[i - 1])))
            start = i
    n, lo, hi = max(clusters, key=lambda c: (c[0], -c[1]))
    return (edges >= lo) & (edges <= hi)


def _fit(values: np.ndarray, minutes: np.ndarray, length: int, on: int) -> tuple[float, int, float]:
    """Best phase for one (length, on) pair: returns (sse, phase, amplitude).

    Model per night n: values = a * wave + c_n, solved in closed form.
    """
    table = _window_means(length, on)
    phases = np.arange(length)
    idx = (minutes[None, :, :] - phases[:, None, None]) % length
    w = table[idx]                                   # (phase, night, sample)
    wc = w - w.mean(axis=2, keepdims=True)
    yc = values - values.mean(axis=1, keepdims=True)
    sww = (wc * wc).sum(axis=(1, 2))
    swy = (wc * yc[None]).sum(axis=(1, 2))
    syy = float((yc * yc).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(sww > 0, swy / np.where(sww > 0, sww, 1), 0.0)
    sse = syy - amp * swy
    sse = np.where(amp > 0, sse, np.inf)
    # Aliased cycles fit equally well at several phases; prefer the one whose
    # per-night offsets are closest to zero (standby is already removed).
    offsets = values.mean(axis=1)[None, :] - amp[:, None] * w.mean(axis=2)
    best = int(np.lexsort(((offsets ** 2).sum(axis=1), np.round(sse, 9)))[0])
    return float(sse[best]), best, float(amp[best])


def learn_fridge(history: SampledSeries, spec: ApplianceSpec,
                 cycle_range: tuple[int, int] = CYCLE_RANGE) -> FridgeEstimate:
    """Fit the fridge cycle on the 02:30-05:00 windows of every night in ``history``.

    ``history`` should already have the daily standby removed.  Nights are
    clustered by mean power and only the largest cluster is used, which drops
    nights with other activity.  Cycle length, phase and active duration are
    found by least squares on a 1-minute grid; the fitted mean night power
    then updates the nominal power.
    """
    beta_night = spec.beta2 or 0.0
    if beta_night <= 0:
        raise ConfigError(f"{spec.name}: night duty cycle (beta2) must be positive")
    beta_day = spec.beta1 if spec.beta1 else beta_night
    if history.n_days < 1:
        raise DataError("fridge learning needs at least one night")
    values, minutes = night_windows(history)
    means = values.mean(axis=1)
    if not np.any(means > 0):
        raise DataError("no fridge activity in the night windows")
    keep = quiet_nights(means)
    values, minutes = values[keep], minutes[keep]
    if values.shape[0] == 0 or not np.any(values > 0):
        raise DataError("no fridge activity in the night windows")

    lo, hi = cycle_range
    best = (np.inf, 0, 0, 0, 0.0)  # sse, length, on, phase, amplitude
    for length in range(lo, hi + 1):
        on = min(length, max(1, int(round(beta_night * length))))
        sse, phase, amp = _fit(values, minutes, length, on)
        if sse < best[0] - 1e-9:
            best = (sse, length, on, phase, amp)
    _, length, on0, phase, amp = best
    for length_c in range(max(lo, length - 2), min(hi, length + 2) + 1):
        span = range(max(1, int(on0 * 0.5)), min(length_c, int(math.ceil(on0 * 1.5))) + 1)
        for on in span:
            sse, ph, a = _fit(values, minutes, length_c, on)
            if sse < best[0] - 1e-9:
                best = (sse, length_c, on, ph, a)
    _, length, on, phase, amp = best
    if amp <= 0:
        raise DataError("fridge fit found no periodic component")

    night_mean = amp * on / length
    nominal = update_nominal_power(spec.nominal_power, night_mean, beta_night)
    day_on = min(length, max(1, int(round(on * beta_day / beta_night))))
    return FridgeEstimate(
        nominal_power=nominal, amplitude=amp, cycle_length=length, active_duration=on,
        day_active_duration=day_on, phase_offset=phase,
        origin=history.start, night_mean=night_mean, nights_used=int(values.shape[0]),
    )


def refit_phase(day: SampledSeries, est: FridgeEstimate, step: int = 5) -> int:
    """Phase (minutes after the day's midnight) on a ``step``-minute grid that best matches ``day``.

    The day is capped at the fridge amplitude so that other appliances do not
    drag the fit.
    """
    capped = np.minimum(day.values, est.amplitude)
    date = day.start.date()
    best_phase, best_sse = 0, np.inf
    for phase in range(0, est.cycle_length, step):
        sig = est.template(date, phase).values
        sse = round(float(((capped - sig) ** 2).sum()), 9)
        if sse < best_sse:
            best_phase, best_sse = phase, sse
    return best_phase


@dataclass(frozen=True)
class FridgeSubtraction:
    signal: SampledSeries       # the synchronised template
    removed: SampledSeries      # the part actually taken out of the day
    residual: SampledSeries
    clipped_energy: float       # Wh of template that exceeded the day
    phase: int


def subtract_fridge(day: SampledSeries, est: FridgeEstimate, refit: bool = True) -> FridgeSubtraction:
    """Remove the synchronised fridge wave, clipping the residual at zero."""
    if day.step != MEASUREMENT_STEP or not day.is_daily:
        raise DataError("fridge subtraction expects one day on the 900 s grid")
    date = day.start.date()
    if refit:
        phase = refit_phase(day, est)
        template = est.template(date, phase)
    else:
        offset = int((day.start - est.origin).total_seconds() // 60)
        phase = (est.phase_offset - offset) % est.cycle_length
        template = est.template(date)
    diff = day.values - template.values
    residual = np.maximum(diff, 0.0)
    clipped = float(np.maximum(-diff, 0.0).sum()) * day.step / 3600.0
    if clipped > 0:
        log.debug("fridge subtraction clipped %.3f Wh on %s", clipped, date)
    removed = day.values - residual
    return FridgeSubtraction(template, day.with_values(removed), day.with_values(residual), clipped, phase)


def detect_peaks(values, delta: float) -> list[tuple[int, float]]:
    """Maxima found by an alternating min/max tracker with hysteresis ``delta``.

    A maximum is reported once the signal has fallen more than ``delta``
    below it; the tracker then looks for a minimum, reported once the signal
    rises more than ``delta`` above it.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    v = np.asarray(values.values if isinstance(values, SampledSeries) else values, dtype=float)
    peaks = []
    mn, mx = math.inf, -math.inf
    mxpos = 0
    look_for_max = True
    for i, x in enumerate(v):
        if x > mx:
            mx, mxpos = x, i
        if x < mn:
            mn = x
        if look_for_max:
            if x < mx - delta:
                peaks.append((mxpos, float(mx)))
                mn = x
                look_for_max = False
        elif x > mn + delta:
            mx, mxpos = x, i
            look_for_max = True
    return peaks


def occupancy(residual, threshold: float = 100.0) -> bool:
    """True when the filtered residual shows at least one peak."""
    return bool(detect_peaks(residual, threshold))
