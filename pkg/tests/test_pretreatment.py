import datetime as dt
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import MONDAY, day_series
from duenilm.core import APPLIANCE_DEFAULTS, ConfigError, DataError, SampledSeries, resample
from duenilm.pretreatment import (
    FridgeEstimate,
    detect_peaks,
    extract_standby,
    learn_fridge,
    occupancy,
    quiet_nights,
    square_wave,
    subtract_fridge,
    update_nominal_power,
)

ORIGIN = dt.datetime.combine(MONDAY, dt.time())


def fridge_history(power, length, on, phase, days=14, standby=0.0):
    est = FridgeEstimate(power, power, length, on, on, phase, ORIGIN, power * on / length, 0)
    sig = np.concatenate([est.minute_signal(MONDAY + dt.timedelta(days=d)) for d in range(days)])
    return est, resample(SampledSeries(ORIGIN, 60, sig + standby), 900)


def peaks_oracle(v, delta):
    """Straightforward re-statement of the hysteresis tracker."""
    out, mn, mx, pos, up = [], np.inf, -np.inf, 0, True
    for i, x in enumerate(v):
        if x > mx:
            mx, pos = x, i
        mn = min(mn, x)
        if up and x < mx - delta:
            out.append((pos, mx))
            mn, up = x, False
        elif not up and x > mn + delta:
            mx, pos, up = x, i, True
    return out


def test_extract_standby():
    standby, rest = extract_standby(day_series(np.r_[np.full(90, 60.0), np.full(6, 48.0)]))
    assert standby == 48.0
    assert rest.values.min() == 0.0 and rest.values.max() == 12.0


def test_update_nominal_power():
    assert update_nominal_power(94.0, 30.0, 0.3) == pytest.approx(100.0)
    with pytest.raises(ConfigError):
        update_nominal_power(94.0, 30.0, 0.0)


def test_square_wave():
    w = square_wave(np.arange(10), 5, 2, 1)
    assert w.tolist() == [0, 1, 1, 0, 0, 0, 1, 1, 0, 0]


@pytest.mark.parametrize("power, length, on, phase", [(94, 83, 25, 7), (66, 60, 18, 45), (140, 126, 63, 100)])
def test_learn_fridge_recovers_cycle(power, length, on, phase):
    spec = replace(APPLIANCE_DEFAULTS["fridge_freezer"], beta1=on / length, beta2=on / length)
    _, history = fridge_history(power, length, on, phase)
    est = learn_fridge(history, spec)
    assert abs(est.cycle_length - length) <= 5
    assert est.nominal_power == pytest.approx(power, rel=0.05)
    assert 1 <= est.nights_used <= 14


def test_learn_fridge_skips_busy_nights():
    spec = replace(APPLIANCE_DEFAULTS["fridge_freezer"], beta1=0.3, beta2=0.3)
    _, history = fridge_history(94, 83, 25, 7)
    values = history.values.copy()
    values[96 * 3 + 10:96 * 3 + 20] += 800.0   # something runs during one night
    est = learn_fridge(history.with_values(values), spec)
    assert est.nights_used == 13
    assert est.nominal_power == pytest.approx(94, rel=0.05)


def test_learn_fridge_errors():
    spec = APPLIANCE_DEFAULTS["fridge_freezer"]
    with pytest.raises(DataError):
        learn_fridge(SampledSeries(ORIGIN, 900, np.zeros(96 * 3)), spec)
    with pytest.raises(ConfigError):
        learn_fridge(SampledSeries(ORIGIN, 900, np.ones(96)), replace(spec, beta2=None))


def test_quiet_nights_largest_cluster():
    means = np.array([30.0, 31.0, 29.0, 90.0, 33.0, 200.0])
    assert quiet_nights(means).tolist() == [True, True, True, False, True, False]


def test_subtract_fridge_exact_template():
    est, history = fridge_history(94, 83, 25, 7, days=3)
    day = history.days()[2]
    extra = np.zeros(96)
    extra[70:74] = 1500.0
    out = subtract_fridge(day.with_values(day.values + extra), est, refit=False)
    np.testing.assert_allclose(out.residual.values, extra, atol=1e-9)
    assert out.clipped_energy == pytest.approx(0.0, abs=1e-9)
    assert np.all(out.residual.values >= 0)
    np.testing.assert_allclose(out.removed.values + out.residual.values, day.values + extra)


def test_subtract_fridge_clips_at_zero():
    est, _ = fridge_history(94, 83, 25, 7, days=1)
    out = subtract_fridge(day_series(np.zeros(96)), est, refit=False)
    assert np.all(out.residual.values == 0)
    assert out.clipped_energy > 0


def test_detect_peaks_examples():
    assert detect_peaks([0, 5, 0, 300, 0], 100.0) == [(3, 300.0)]
    assert detect_peaks([0, 300, 250, 400, 0], 100.0) == [(3, 400.0)]
    assert detect_peaks([0, 50, 0], 100.0) == []
    with pytest.raises(ValueError):
        detect_peaks([0, 1], 0.0)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 96), elements=st.floats(0, 3000, allow_nan=False)),
       st.floats(1, 500))
def test_detect_peaks_matches_oracle(values, delta):
    got = detect_peaks(values, delta)
    assert got == peaks_oracle(values, delta)
    for pos, val in got:
        assert values[pos] == val
        assert np.any(values[pos:] < val - delta)


def test_occupancy():
    quiet = np.zeros(96)
    busy = quiet.copy()
    busy[40] = 250.0
    assert not occupancy(quiet)
    assert occupancy(busy)
    assert not occupancy(busy, threshold=300.0)
