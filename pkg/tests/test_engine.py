
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from conftest import MONDAY, day_series
from duenilm.core import CATEGORIES, ActivityState as A, Category, ConfigError, DataError, SampledSeries
from duenilm.engine import (
    DUEDisaggregator,
    EngineConfig,
    compatibility_filter,
    disaggregate,
    disaggregate_day,
    implied_appliances,
)
from duenilm.simulate import simulate_household


@pytest.fixture(scope="module")
def week(ukdale, ukdale_model):
    sim = simulate_household(ukdale, ukdale_model, MONDAY, 7, seed=1)
    return sim, sim.aggregate


def test_flat_day_goes_to_standby(ukdale, ukdale_model):
    out = disaggregate_day(day_series(np.full(96, 50.0)), ukdale, ukdale_model)
    res = out.result
    assert res.occupancy == {MONDAY: False}
    assert res.iterations == {MONDAY: 0}
    np.testing.assert_array_equal(res.per_category[Category.STANDBY].values, 50.0)
    for c in CATEGORIES:
        if c is not Category.STANDBY:
            assert res.per_category[c].values.sum() == 0


def test_implied_appliances():
    assert implied_appliances(A.LAUNDRY) == ("washing_machine", "tumble_dryer")
    assert "tv" in implied_appliances(A.WATCHING_TV)
    assert implied_appliances(A.SLEEPING) == ()


def test_compatibility_filter(ukdale):
    assert not compatibility_filter(A.LAUNDRY, 100.0, ukdale)      # washing machine is 406 W
    assert compatibility_filter(A.LAUNDRY, 500.0, ukdale)
    assert compatibility_filter(A.SLEEPING, 0.0, ukdale)
    assert compatibility_filter(A.COOKING, 2500.0, ukdale)
    assert not compatibility_filter(A.COOKING, 400.0, ukdale)     # cheapest is the 500 W stove


def test_conservation_and_nonnegativity(ukdale, ukdale_model, week):
    _, agg = week
    res = disaggregate(agg, ukdale, ukdale_model, EngineConfig(seed=5))
    total = sum(res.per_category[c].values for c in CATEGORIES)
    expected = agg.values.reshape(-1, 15).mean(axis=1)
    np.testing.assert_allclose(total, expected, atol=1e-6)
    for c in CATEGORIES:
        assert res.per_category[c].values.min() >= 0
    for date, gaps in res.gaps.items():
        if gaps:
            assert res.residual_energy[date] == pytest.approx(min(gaps))


@pytest.mark.parametrize("mode", ["sequential", "joint"])
def test_determinism(ukdale, ukdale_model, week, mode):
    _, agg = week
    day = agg.slice_days(2, 2)
    a = disaggregate(day, ukdale, ukdale_model, EngineConfig(seed=9, optimization=mode))
    b = disaggregate(day, ukdale, ukdale_model, EngineConfig(seed=9, optimization=mode))
    for c in CATEGORIES:
        assert a.per_category[c] == b.per_category[c]
    c_ = disaggregate(day, ukdale, ukdale_model, EngineConfig(seed=10, optimization=mode))
    assert any(a.per_category[c] != c_.per_category[c] for c in CATEGORIES)


def test_unassigned_mode_keeps_leftover_apart(ukdale, ukdale_model, week):
    _, agg = week
    day = agg.slice_days(0, 1)
    res = disaggregate(day, ukdale, ukdale_model, EngineConfig(residual_to_standby=False))
    total = sum(res.per_category[c].values for c in CATEGORIES) + res.unassigned.values
    np.testing.assert_allclose(total, day.values.reshape(-1, 15).mean(axis=1), atol=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0, 4000, allow_nan=False), min_size=96, max_size=96), st.integers(0, 1000))
def test_conservation_on_arbitrary_days(ukdale, ukdale_model, values, seed):
    day = day_series(values)
    res = disaggregate_day(day, ukdale, ukdale_model, EngineConfig(seed=seed, max_iterations=3)).result
    total = sum(res.per_category[c].values for c in CATEGORIES)
    np.testing.assert_allclose(total, day.values, atol=1e-6)


def test_config_round_trip_and_errors(tmp_path):
    cfg = EngineConfig(tolerance=0.2, max_iterations=5, seed=4, optimization="joint", residual_to_standby=False)
    assert EngineConfig.parse(cfg.to_ini()) == cfg
    path = tmp_path / "engine.ini"
    path.write_text(cfg.to_ini())
    assert EngineConfig.load(path) == cfg
    assert EngineConfig.parse("") == EngineConfig()
    for bad in ("[engine]\ntolerance = 0\n", "[engine]\nfoo = 1\n", "[engine]\nmax_iterations = x\n",
                "[engine]\noptimization = greedy\n", "[engine]\nsimulation_step = 900\n", "[engine"):
        with pytest.raises(ConfigError):
            EngineConfig.parse(bad)
    with pytest.raises(ConfigError):
        EngineConfig.load(tmp_path / "missing.ini")


def test_rejects_partial_days(ukdale, ukdale_model):
    with pytest.raises(DataError):
        disaggregate(SampledSeries(MONDAY, 900, np.zeros(50)), ukdale, ukdale_model)


def test_estimator_api(ukdale, ukdale_model, week):
    sim, agg = week
    est = DUEDisaggregator(household=ukdale, model=ukdale_model, seed=3, max_iterations=5)
    params = est.get_params()
    assert params["seed"] == 3 and params["optimization"] == "sequential"
    twin = clone(est)
    assert twin.get_params()["max_iterations"] == 5
    idx = pd.date_range(agg.start, periods=len(agg), freq="min")
    frame = est.fit(pd.Series(agg.values, index=idx)).predict(pd.Series(agg.values, index=idx))
    assert list(frame.columns) == [str(c) for c in CATEGORIES]
    assert frame.shape == (7 * 96, len(CATEGORIES))
    assert est.fridge_ is not None
    np.testing.assert_allclose(frame.sum(axis=1).to_numpy(), agg.values.reshape(-1, 15).mean(axis=1), atol=1e-6)
    with pytest.raises(ConfigError):
        DUEDisaggregator(household=None, model=ukdale_model).fit(agg)


def test_predict_before_fit_fails(ukdale, ukdale_model):
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        DUEDisaggregator(household=ukdale, model=ukdale_model).predict(day_series(np.zeros(96)))
