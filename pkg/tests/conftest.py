import datetime as dt

import numpy as np
import pytest
from hypothesis import strategies as st

from duenilm.core import ACTIVITIES, MEASUREMENT_STEP, SLOTS_PER_DAY, AgeGroup, Employment, SampledSeries
from duenilm.household import bundled_profile
from duenilm.synthdiary import SyntheticDiaryConfig, generate_diary_events
from duenilm.tou import ActivityEvent, ActivityModel

MONDAY = dt.date(2015, 4, 6)


def day_series(values, date=MONDAY, step=MEASUREMENT_STEP):
    return SampledSeries(dt.datetime.combine(date, dt.time()), step, np.asarray(values, dtype=float))


def household_model(household, persons=10, days=7, seed=3):
    strata = {(p.employment, p.age_group): persons for p in household.persons}
    return ActivityModel.from_events(generate_diary_events(SyntheticDiaryConfig(strata, days=days, seed=seed)))


@pytest.fixture(scope="session")
def ukdale():
    return bundled_profile("ukdale")


@pytest.fixture(scope="session")
def ukdale_model(ukdale):
    return household_model(ukdale)


EMPLOYMENTS = list(Employment)
AGE_GROUPS = list(AgeGroup)


@st.composite
def diary_events(draw, max_events=50, max_days=4):
    """Random tiling diaries: a few person-days, at most ``max_events`` episodes in total."""
    n_days = draw(st.integers(1, max_days))
    budget = max_events
    events = []
    start = dt.date(2015, 4, 3)  # Friday, so day types vary
    for d in range(n_days):
        if budget < 1:
            break
        n = draw(st.integers(1, min(budget, 12)))
        budget -= n
        cuts = sorted(draw(st.sets(st.integers(1, SLOTS_PER_DAY - 1), min_size=n - 1, max_size=n - 1)))
        bounds = [0] + cuts + [SLOTS_PER_DAY]
        person = f"p{draw(st.integers(0, 2))}"
        emp = draw(st.sampled_from(EMPLOYMENTS[:2]))
        age = draw(st.sampled_from(AGE_GROUPS[:2]))
        date = start + dt.timedelta(days=draw(st.integers(0, 6)) + 7 * d)
        for s, e in zip(bounds, bounds[1:]):
            act = draw(st.sampled_from(ACTIVITIES))
            events.append(ActivityEvent(f"{person}-{d}", date, s, e, act, emp, age))
    return events


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    """Remember one criterion's outcome for the terminal summary and assert it."""
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
