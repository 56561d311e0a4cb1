import datetime as dt
import io
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import diary_events
from duenilm.core import ACTIVITIES, SLOTS_PER_DAY, ActivityState, AgeGroup, DayType, Employment
from duenilm.tou import (
    ActivityEvent,
    ActivityModel,
    DiaryError,
    Fallback,
    Stratum,
    estimate_durations,
    estimate_initial,
    estimate_transitions,
    parse_diary,
    write_diary,
)

FT, ADULT = Employment.FULL_TIME, AgeGroup.ADULT_ACTIVE
HEADER = "person,employment,age_group,date,activity,start,end\n"


def oracle_counts(events):
    """Independent counting: walk each person-day episode by episode."""
    initial, trans = Counter(), Counter()
    days = {}
    for ev in events:
        days.setdefault((ev.person, ev.date), []).append(ev)
    for day in days.values():
        day = sorted(day, key=lambda e: e.start)
        s = day[0].stratum
        initial[(s, day[0].activity)] += 1
        for a, b in zip(day, day[1:]):
            trans[(s, a.end, a.activity, b.activity)] += 1
    return initial, trans


def oracle_initial(initial, stratum, act):
    total = sum(v for (s, _), v in initial.items() if s == stratum)
    return Fraction(initial[(stratum, act)], total) if total else None


def oracle_transition(trans, stratum, slot, a, b):
    total = sum(v for (s, t, x, _), v in trans.items() if s == stratum and t == slot and x == a)
    return Fraction(trans[(stratum, slot, a, b)], total) if total else None


def test_parse_minimal_diary():
    text = HEADER + (
        "p1,full-time,adult-active,2005-10-03,Sleeping,00:00,07:00\n"
        "p1,full-time,adult-active,2005-10-03,Working,07:00,17:00\n"
        "p1,full-time,adult-active,2005-10-03,WatchingTV,17:00,24:00\n")
    events = parse_diary(io.StringIO(text))
    assert [e.activity for e in events] == [ActivityState.SLEEPING, ActivityState.WORKING, ActivityState.WATCHING_TV]
    assert events[1].start == 84 and events[1].end == 204
    assert events[2].end == SLOTS_PER_DAY
    assert events[0].day_type is DayType.WEEKDAY
    model = ActivityModel.from_events(events)
    s = Stratum(FT, ADULT, DayType.WEEKDAY)
    assert model.initial(s).probabilities[ActivityState.SLEEPING.index] == 1.0
    row = model.transition(s, ActivityState.SLEEPING, 84)
    assert row.level is Fallback.OBSERVED
    assert row.probabilities[ActivityState.WORKING.index] == 1.0


@pytest.mark.parametrize("body, fragment", [
    ("p1,full-time,adult-active,2005-10-03,Sleeping,00:00,07:00\n", "gap"),
    ("p1,full-time,adult-active,2005-10-03,Sleeping,00:00,12:00\n"
     "p1,full-time,adult-active,2005-10-03,Working,11:00,24:00\n", "overlap"),
    ("p1,full-time,adult-active,2005-10-03,Dancing,00:00,24:00\n", "unknown activity"),
    ("p1,full-time,adult-active,2005-10-03,Sleeping,00:00,07:03\n", "5-minute grid"),
    ("p1,full-time,adult-active,2005-10-03,Sleeping,07:00,06:00\n", "ends before"),
    ("p1,full-time,adult-active,2005-10-03,Sleeping,00:00\n", "expected 7 fields"),
])
def test_parse_rejects_bad_diaries(body, fragment):
    with pytest.raises(DiaryError, match=fragment):
        parse_diary(io.StringIO(HEADER + body))


def test_parse_rejects_bad_header():
    with pytest.raises(DiaryError, match="header"):
        parse_diary(io.StringIO("a,b,c\n"))


@settings(max_examples=50, deadline=None)
@given(diary_events())
def test_write_parse_round_trip(events):
    text = write_diary(events)
    again = parse_diary(io.StringIO(text))
    assert sorted(again) == sorted(events)


@settings(max_examples=100, deadline=None)
@given(diary_events())
def test_estimates_match_counting_oracle(events):
    model = ActivityModel.from_events(events)
    initial, trans = oracle_counts(events)
    init_est = estimate_initial(events)
    trans_est = estimate_transitions(events)
    for stratum in {e.stratum for e in events}:
        for a in ACTIVITIES:
            assert init_est[stratum][a.index] == float(oracle_initial(initial, stratum, a))
        for (s, slot, a, _), _n in trans.items():
            if s != stratum:
                continue
            row = model.transition(stratum, a, slot)
            assert row.level is Fallback.OBSERVED
            for b in ACTIVITIES:
                want = oracle_transition(trans, stratum, slot, a, b)
                assert Fraction(row.probabilities[b.index]) == Fraction(float(want))
                assert trans_est[stratum][slot, a.index, b.index] == float(want)


@settings(max_examples=100, deadline=None)
@given(diary_events())
def test_distributions_are_stochastic(events):
    model = ActivityModel.from_events(events)
    for stratum in {e.stratum for e in events}:
        assert abs(model.initial(stratum).probabilities.sum() - 1.0) <= 1e-9
        tensor = estimate_transitions(events).get(stratum)
        if tensor is None:
            continue
        sums = tensor.sum(axis=-1)
        observed = sums > 0
        assert np.all(np.abs(sums[observed] - 1.0) <= 1e-9)
        assert not observed[0].any()


def test_fallback_chain():
    # one weekday person-day only
    events = [ActivityEvent("p", dt.date(2015, 4, 6), 0, 100, ActivityState.SLEEPING, FT, ADULT),
              ActivityEvent("p", dt.date(2015, 4, 6), 100, SLOTS_PER_DAY, ActivityState.WORKING, FT, ADULT)]
    model = ActivityModel.from_events(events)
    weekday = Stratum(FT, ADULT, DayType.WEEKDAY)
    sunday = Stratum(FT, ADULT, DayType.SUNDAY)
    assert model.initial(weekday).level is Fallback.OBSERVED
    assert model.initial(sunday).level is Fallback.POOLED
    assert model.transition(sunday, ActivityState.SLEEPING, 100).level is Fallback.POOLED
    uniform = model.transition(weekday, ActivityState.SLEEPING, 50)
    assert uniform.level is Fallback.UNIFORM
    np.testing.assert_allclose(uniform.probabilities, 1.0 / len(ACTIVITIES))
    other = Stratum(Employment.RETIRED, AgeGroup.SENIOR_ACTIVE, DayType.WEEKDAY)
    assert model.initial(other).level is Fallback.UNIFORM
    stats, level = model.duration(weekday, ActivityState.SLEEPING)
    assert level is Fallback.OBSERVED and stats.mean == 500.0 and stats.std == 0.0
    assert model.duration(other, ActivityState.WORKING)[1] is Fallback.GLOBAL
    stats, level = model.duration(weekday, ActivityState.MUSIC)
    assert level is Fallback.DEFAULT and (stats.mean, stats.std) == (60.0, 30.0)


def test_transition_slot_range(ukdale_model):
    s = ukdale_model.strata[0]
    for slot in (0, SLOTS_PER_DAY):
        with pytest.raises(ValueError):
            ukdale_model.transition(s, ActivityState.SLEEPING, slot)


def test_durations_population_std():
    d1, d2 = dt.date(2015, 4, 6), dt.date(2015, 4, 7)
    events = []
    for date, cut in ((d1, 12), (d2, 24)):
        events += [ActivityEvent("p", date, 0, cut, ActivityState.MUSIC, FT, ADULT),
                   ActivityEvent("p", date, cut, SLOTS_PER_DAY, ActivityState.SLEEPING, FT, ADULT)]
    stats = estimate_durations(events)[(Stratum(FT, ADULT, DayType.WEEKDAY), ActivityState.MUSIC)]
    assert stats.count == 2
    assert stats.mean == 90.0
    assert stats.std == pytest.approx(30.0)


def test_model_json_round_trip(tmp_path, ukdale_model):
    path = tmp_path / "model.json"
    ukdale_model.save(path)
    again = ActivityModel.load(path)
    assert again.strata == ukdale_model.strata
    for s in ukdale_model.strata:
        np.testing.assert_array_equal(again.transition_counts[s], ukdale_model.transition_counts[s])
        np.testing.assert_array_equal(again.initial_counts[s], ukdale_model.initial_counts[s])
        np.testing.assert_array_equal(again.duration_sums[s], ukdale_model.duration_sums[s])
    rows = ukdale_model.summary()
    assert len(rows) == len(ukdale_model.strata)
    assert all(r["diaries"] > 0 for r in rows)
