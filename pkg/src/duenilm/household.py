"""Household profile files.

A profile is an INI-style key-value file::

    [household]
    name = UK-DALE house 1
    children_under_10 = 0
    electrical_heating = no
    latitude = 51.46
    longitude = -0.13

    [person.1]
    employment = full-time
    age_group = senior-active

    [habits]
    washing_machine_per_week = 1
    dishwasher_per_week = 4
    computer_usage = occasional
    lunches_at_home = 7

    [appliances]
    kettle = 1
    tv = 1

    [appliance.kettle]
    nominal_power = 2000

Omitted weekly quotas are unconstrained, omitted usage levels are ``normal``
and omitted meal counts are 7.  Without an ``[appliances]`` section the
household gets :data:`DEFAULT_INVENTORY`.  Appliances not listed in a present
``[appliances]`` section are not owned.
"""

from __future__ import annotations

import configparser
import io
from importlib import resources
from pathlib import Path
from typing import Union

from .core import (
    APPLIANCE_DEFAULTS,
    ConfigError,
    Habits,
    HouseholdProfile,
    PersonProfile,
    UsageLevel,
    make_inventory,
)

DEFAULT_INVENTORY = {
    "coffee_maker": 1, "microwave": 1, "kettle": 1, "oven": 1, "stove": 1,
    "tv": 1, "pc": 1, "stereo": 1, "fridge_freezer": 1,
    "washing_machine": 1, "vacuum": 1, "printer": 1, "lighting": 1, "modem": 1,
}

_HABIT_INTS = ("washing_machine_per_week", "tumble_dryer_per_week", "dishwasher_per_week",
               "lunches_at_home", "dinners_at_home")
_HABIT_LEVELS = ("computer_usage", "tv_usage", "stereo_usage", "console_usage")
_OVERRIDABLE = ("nominal_power", "beta1", "beta2", "beta3", "tau")

PathLike = Union[str, Path]


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    return parser


def parse_household(text: str) -> HouseholdProfile:
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed household profile: {exc}") from exc

    person_sections = sorted(
        (s for s in parser.sections() if s.startswith("person.")),
        key=lambda s: int(s.split(".", 1)[1]) if s.split(".", 1)[1].isdigit() else 10**9,
    )
    if not person_sections:
        raise ConfigError("household profile has no [person.N] section")
    persons = []
    for section in person_sections:
        sec = parser[section]
        try:
            persons.append(PersonProfile(sec["employment"], sec["age_group"]))
        except KeyError as exc:
            raise ConfigError(f"[{section}] is missing {exc.args[0]}") from exc
        except ValueError as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc

    habits_kwargs = {}
    if parser.has_section("habits"):
        for key, value in parser["habits"].items():
            if key in _HABIT_INTS:
                try:
                    habits_kwargs[key] = int(value)
                except ValueError as exc:
                    raise ConfigError(f"habit {key} must be an integer, got {value!r}") from exc
            elif key in _HABIT_LEVELS:
                try:
                    habits_kwargs[key] = UsageLevel(value.strip())
                except ValueError as exc:
                    raise ConfigError(f"habit {key}: {exc}") from exc
            else:
                raise ConfigError(f"unknown habit {key!r}")
    habits = Habits(**habits_kwargs)

    if parser.has_section("appliances"):
        counts = {}
        for key, value in parser["appliances"].items():
            try:
                counts[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"appliance count {key} must be an integer") from exc
    else:
        counts = dict(DEFAULT_INVENTORY)
    overrides = {}
    for section in parser.sections():
        if section.startswith("appliance."):
            name = section.split(".", 1)[1]
            fields = {}
            for key, value in parser[section].items():
                if key not in _OVERRIDABLE:
                    raise ConfigError(f"[{section}] cannot override {key!r}")
                fields[key] = float(value)
            overrides[name] = fields
    for name in counts:
        if name not in APPLIANCE_DEFAULTS:
            raise ConfigError(f"unknown appliance {name!r}")
    inventory = make_inventory(counts, overrides)

    hh = parser["household"] if parser.has_section("household") else {}
    heating = str(hh.get("electrical_heating", "no")).strip().lower()
    if heating not in ("no", "false", "0", "yes", "true", "1"):
        raise ConfigError(f"electrical_heating must be yes/no, got {heating!r}")
    if heating in ("yes", "true", "1"):
        raise ConfigError("electrical_heating=yes is not supported")
    try:
        return HouseholdProfile(
            persons=tuple(persons),
            inventory=inventory,
            habits=habits,
            children_under_10=int(hh.get("children_under_10", 0)),
            electrical_heating=False,
            latitude=float(hh.get("latitude", 47.0)),
            longitude=float(hh.get("longitude", 8.0)),
            name=str(hh.get("name", "")),
        )
    except ValueError as exc:
        raise ConfigError(f"household profile: {exc}") from exc


def load_household(path: PathLike) -> HouseholdProfile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read household profile {path}: {exc}") from exc
    return parse_household(text)


def bundled_profile(name: str) -> HouseholdProfile:
    """Load one of the profiles shipped with the package (``ukdale``, ``eco``, ``smartenergy``)."""
    files = {"ukdale": "ukdale_house1.ini", "eco": "eco_house2.ini",
             "smartenergy": "smartenergy_apt1.ini"}
    if name not in files:
        raise ConfigError(f"no bundled profile {name!r}; choose from {sorted(files)}")
    text = resources.files("duenilm").joinpath(f"data/profiles/{files[name]}").read_text(encoding="utf-8")
    return parse_household(text)


def dump_household(profile: HouseholdProfile) -> str:
    parser = _parser()
    parser["household"] = {
        "name": profile.name,
        "children_under_10": str(profile.children_under_10),
        "electrical_heating": "no",
        "latitude": repr(profile.latitude),
        "longitude": repr(profile.longitude),
    }
    for i, person in enumerate(profile.persons, start=1):
        parser[f"person.{i}"] = {"employment": person.employment.value,
                                 "age_group": person.age_group.value}
    habits = {}
    for key in _HABIT_INTS:
        value = getattr(profile.habits, key)
        if value is not None:
            habits[key] = str(value)
    for key in _HABIT_LEVELS:
        habits[key] = getattr(profile.habits, key).value
    parser["habits"] = habits
    parser["appliances"] = {a.name: str(a.count) for a in profile.inventory}
    for spec in profile.inventory:
        default = APPLIANCE_DEFAULTS[spec.name]
        changed = {k: repr(getattr(spec, k)) for k in _OVERRIDABLE
                   if getattr(spec, k) != getattr(default, k) and getattr(spec, k) is not None}
        if changed:
            parser[f"appliance.{spec.name}"] = changed
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
