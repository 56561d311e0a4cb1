import numpy as np

from conftest import MONDAY, household_model
from duenilm.core import CATEGORIES, Category, Habits, SIM_STEP
from duenilm.household import parse_household
from duenilm.simulate import simulate_household

WASHER_HOUSE = """
[person.1]
employment = retired
age_group = senior-active
[habits]
washing_machine_per_week = 1
[appliances]
washing_machine = 1
modem = 1
"""


def test_simulation_shape_and_standby(ukdale, ukdale_model):
    sim = simulate_household(ukdale, ukdale_model, MONDAY, 2, seed=4)
    for c in CATEGORIES:
        s = sim.per_category[c]
        assert s.step == SIM_STEP and len(s) == 2 * 1440
        assert s.values.min() >= 0
    np.testing.assert_array_equal(sim.per_category[Category.STANDBY].values, 8.0)
    assert sim.per_category[Category.FRIDGE].values.max() == 94.0
    at15 = sim.at()
    assert len(at15[Category.LIGHT]) == 192
    np.testing.assert_allclose(sim.aggregate.values, sum(sim.per_category[c].values for c in CATEGORIES))
    pulse_energy = sum(p.power * (p.end - p.start) for d in sim.pulses.values() for p in d
                       if p.appliance != "lighting")
    assigned = sum(sim.per_category[c].values.sum() for c in CATEGORIES
                   if c not in (Category.STANDBY, Category.FRIDGE, Category.LIGHT))
    assert assigned == pulse_energy


def test_simulation_is_deterministic(ukdale, ukdale_model):
    a = simulate_household(ukdale, ukdale_model, MONDAY, 2, seed=4)
    b = simulate_household(ukdale, ukdale_model, MONDAY, 2, seed=4)
    c = simulate_household(ukdale, ukdale_model, MONDAY, 2, seed=5)
    assert all(a.per_category[k] == b.per_category[k] for k in CATEGORIES)
    assert any(a.per_category[k] != c.per_category[k] for k in CATEGORIES)


def test_weekly_quota_respected():
    hh = parse_household(WASHER_HOUSE)
    assert hh.habits == Habits(washing_machine_per_week=1)
    model = household_model(hh)
    sim = simulate_household(hh, model, MONDAY, 21, seed=2)
    weeks = {}
    for date, pulses in sim.pulses.items():
        key = date.isocalendar()[:2]
        weeks[key] = weeks.get(key, 0) + sum(p.appliance == "washing_machine" for p in pulses)
    assert all(n <= 1 for n in weeks.values())
