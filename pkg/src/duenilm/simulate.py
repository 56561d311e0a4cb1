"""Forward simulation of a labelled household load.

The same recognizer that disaggregates is run with an unlimited residual, so
every gated appliance use is placed at the start of its episode.  Standby is
the modems' nominal power; the cold appliance is a square wave whose cycle
length is ``tau / beta2`` with a random phase.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .core import (
    CATEGORIES,
    MEASUREMENT_STEP,
    MINUTES_PER_DAY,
    SIM_STEP,
    Category,
    HouseholdProfile,
    SampledSeries,
    resample,
)
from .engine import cold_appliance
from .pretreatment import FridgeEstimate
from .recognizer import N_SLOTS, DeviceStateVector, Pulse, RecognitionContext, recognize_all
from .sampler import ActivityChain, RandomSource, generate_chain
from .tou import ActivityModel


@dataclass
class SimulatedHousehold:
    """Ground truth per category on the 60 s grid, with the chains and pulses behind it."""

    per_category: dict[Category, SampledSeries]
    chains: dict[dt.date, list[ActivityChain]]
    pulses: dict[dt.date, list[Pulse]]
    fridge: FridgeEstimate | None

    @property
    def aggregate(self) -> SampledSeries:
        first = self.per_category[CATEGORIES[0]]
        total = np.zeros(len(first))
        for c in CATEGORIES:
            total = total + self.per_category[c].values
        return first.with_values(total)

    def at(self, step: int = MEASUREMENT_STEP) -> dict[Category, SampledSeries]:
        return {c: resample(s, step) for c, s in self.per_category.items()}


def true_fridge(household: HouseholdProfile, origin: dt.datetime, rng: RandomSource) -> FridgeEstimate | None:
    spec = cold_appliance(household)
    if spec is None or not spec.tau or not spec.beta2:
        return None
    length = max(1, int(round(spec.tau / spec.beta2)))
    on = min(length, int(round(spec.tau)))
    beta_day = spec.beta1 if spec.beta1 else spec.beta2
    day_on = min(length, max(1, int(round(spec.tau * beta_day / spec.beta2))))
    phase = int(rng.uniform() * length)
    return FridgeEstimate(
        nominal_power=spec.nominal_power, amplitude=spec.nominal_power, cycle_length=length,
        active_duration=on, day_active_duration=day_on, phase_offset=phase, origin=origin,
        night_mean=spec.nominal_power * on / length, nights_used=0,
    )


def simulate_household(household: HouseholdProfile, model: ActivityModel, start: dt.date,
                       days: int, seed: int) -> SimulatedHousehold:
    """Simulate ``days`` consecutive days starting at midnight of ``start``."""
    if days < 1:
        raise ValueError("days must be >= 1")
    root = RandomSource(seed)
    origin = dt.datetime.combine(start, dt.time())
    fridge = true_fridge(household, origin, root.spawn(0))
    modem = household.appliance("modem")
    standby_power = modem.nominal_power * modem.count if modem is not None else 0.0

    n = days * MINUTES_PER_DAY
    signals = {c: np.zeros(n) for c in CATEGORIES}
    signals[Category.STANDBY][:] = standby_power
    chains, pulses = {}, {}
    states = DeviceStateVector()
    for d in range(days):
        date = start + dt.timedelta(days=d)
        day_rng = root.spawn(1, date.toordinal())
        states.start_day(date)
        ctx = RecognitionContext.create(household, date, np.full(N_SLOTS, np.inf), day_rng.spawn(3),
                                        states, meal_rng=day_rng.spawn(0))
        day_chains = []
        for p, person in enumerate(household.persons):
            chain = generate_chain(model, person, date, day_rng.spawn(2, p, 0), person_index=p)
            ctx.rng = day_rng.spawn(2, p, 1)
            recognize_all(ctx, chain, p)
            day_chains.append(chain)
        sl = slice(d * MINUTES_PER_DAY, (d + 1) * MINUTES_PER_DAY)
        for c in CATEGORIES:
            signals[c][sl] += ctx.signals[c]
        if fridge is not None:
            signals[Category.FRIDGE][sl] += fridge.minute_signal(date)
        states = ctx.states
        chains[date] = day_chains
        pulses[date] = list(ctx.pulses)
    per_category = {c: SampledSeries(origin, SIM_STEP, signals[c]) for c in CATEGORIES}
    return SimulatedHousehold(per_category, chains, pulses, fridge)
