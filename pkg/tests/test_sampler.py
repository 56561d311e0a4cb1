import datetime as dt
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import MONDAY
from duenilm.core import SLOTS_PER_DAY, ActivityState, DayType
from duenilm.sampler import (
    ActivityChain,
    RandomSource,
    generate_chain,
    next_activity,
    sample_discrete,
    sample_duration,
)
from duenilm.tou import Stratum


def first_reaching(weights, eps):
    """Exact oracle: smallest n with sum(w[:n+1]) / sum(w) >= eps."""
    w = [Fraction(x) for x in weights]
    total = sum(w)
    acc = Fraction(0)
    for n, x in enumerate(w):
        acc += x
        if acc / total >= Fraction(eps):
            return n
    return len(w) - 1


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=14),
       st.floats(1e-9, 1 - 1e-9))
def test_sample_discrete_matches_oracle(weights, eps):
    assume(sum(weights) > 0)
    n = sample_discrete(weights, eps)
    assert weights[n] > 0
    assert n == first_reaching(weights, eps)


@pytest.mark.parametrize("weights, eps", [([], 0.5), ([0, 0], 0.5), ([1, -1], 0.5), ([1], 0.0), ([1], 1.0)])
def test_sample_discrete_rejects(weights, eps):
    with pytest.raises(ValueError):
        sample_discrete(weights, eps)


def test_random_source_streams():
    a, b = RandomSource(5).spawn(1, 2), RandomSource(5).spawn(1, 2)
    assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]
    assert RandomSource(5).spawn(1).uniform() != RandomSource(5).spawn(2).uniform()
    with pytest.raises(ValueError):
        RandomSource(-1)


def test_chain_validation():
    with pytest.raises(ValueError):
        ActivityChain(0, MONDAY, ((ActivityState.SLEEPING, 0, 100),))
    with pytest.raises(ValueError):
        ActivityChain(0, MONDAY, ((ActivityState.SLEEPING, 0, 100), (ActivityState.MUSIC, 90, SLOTS_PER_DAY)))
    chain = ActivityChain.constant(ActivityState.COOKING, MONDAY)
    assert chain.minutes().shape == (1440,)
    assert chain.episodes(ActivityState.COOKING) == [(ActivityState.COOKING, 0, 1440)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 3), st.integers(0, 6))
def test_generated_chains_tile_the_day(ukdale, ukdale_model, seed, p, offset):
    date = MONDAY + dt.timedelta(days=offset)
    person = ukdale.persons[p]
    chain = generate_chain(ukdale_model, person, date, RandomSource(seed), person_index=p)
    assert chain.entries[0][1] == 0 and chain.entries[-1][2] == SLOTS_PER_DAY
    acts = [a for a, _, _ in chain]
    assert all(x is not y for x, y in zip(acts, acts[1:]))
    again = generate_chain(ukdale_model, person, date, RandomSource(seed), person_index=p)
    assert again == chain


def test_filter_vetoes_activity(ukdale, ukdale_model):
    banned = ActivityState.WATCHING_TV
    hits_free = hits_filtered = 0
    for seed in range(40):
        free = generate_chain(ukdale_model, ukdale.persons[0], MONDAY, RandomSource(seed))
        filtered = generate_chain(ukdale_model, ukdale.persons[0], MONDAY, RandomSource(seed),
                                  accept=lambda a, s, e: a is not banned)
        hits_free += len(free.episodes(banned))
        hits_filtered += len(filtered.episodes(banned))
    assert hits_free > 0
    assert hits_filtered < hits_free
    # without retries the filter cannot change anything
    no_retry = generate_chain(ukdale_model, ukdale.persons[0], MONDAY, RandomSource(0),
                              accept=lambda a, s, e: False, max_retries=0)
    assert no_retry == generate_chain(ukdale_model, ukdale.persons[0], MONDAY, RandomSource(0))


def test_initial_frequencies_follow_model(ukdale, ukdale_model):
    person = ukdale.persons[0]
    stratum = Stratum(person.employment, person.age_group, DayType.WEEKDAY)
    probs = ukdale_model.initial(stratum).probabilities
    rng = RandomSource(11)
    n = 4000
    counts = np.zeros(len(probs))
    for _ in range(n):
        counts[next_activity(ukdale_model, stratum, None, rng).index] += 1
    np.testing.assert_allclose(counts / n, probs, atol=4 * np.sqrt(0.25 / n))


def test_durations_on_grid(ukdale, ukdale_model):
    stratum = ukdale_model.strata[0]
    rng = RandomSource(3)
    draws = [sample_duration(ukdale_model, stratum, ActivityState.EATING, rng) for _ in range(200)]
    assert all(d >= 5 and d % 5 == 0 for d in draws)
