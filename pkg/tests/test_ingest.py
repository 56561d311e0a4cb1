import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MONDAY
from duenilm.core import Category, ConfigError, DataError, SampledSeries
from duenilm.ingest import (
    Dataset,
    default_split,
    fill_gaps,
    load_channel_map,
    load_channels,
    parse_channel_map,
    read_channel,
    slot_means,
    split_train_test,
    to_epoch,
    write_channel,
)

MAP = "channel,appliance,category\nk,kettle,Cooking\ns,stove,Cooking\nl,lighting,Light\nmains,aggregate,ignore\n"
T0 = to_epoch(dt.datetime.combine(MONDAY, dt.time()))


def write_rows(path, rows, header="timestamp,power"):
    path.write_text(header + "\n" + "".join(f"{t},{p}\n" for t, p in rows))


def test_parse_channel_map():
    cmap = parse_channel_map(MAP)
    assert [e.channel for e in cmap.used] == ["k", "l", "s"]
    assert cmap.categories() == [Category.COOKING, Category.LIGHT]
    assert parse_channel_map(cmap.to_csv()) == cmap


@pytest.mark.parametrize("text, fragment", [
    ("a,b\n", "header"),
    ("channel,appliance,category\nk,kettle\n", "line 2"),
    ("channel,appliance,category\nk,kettle,Toasting\n", "unknown category"),
    ("channel,appliance,category\nk,kettle,Cooking\nk,oven,Cooking\n", "mapped twice"),
])
def test_bad_channel_maps(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_channel_map(text)


def test_missing_channel_map(tmp_path):
    with pytest.raises(ConfigError):
        load_channel_map(tmp_path / "nope.csv")


def test_read_channel_sorts_and_validates(tmp_path):
    p = tmp_path / "c.csv"
    write_rows(p, [(120, 5.0), (60, 3.0)])
    ts, power = read_channel(p)
    assert ts.tolist() == [60, 120] and power.tolist() == [3.0, 5.0]
    write_rows(p, [(60, 3.0), (120, "abc")])
    with pytest.raises(DataError, match="line 3"):
        read_channel(p)
    write_rows(p, [(60, -1.0)])
    with pytest.raises(DataError, match="line 2"):
        read_channel(p)
    write_rows(p, [(60, 1.0)], header="time,watts")
    with pytest.raises(DataError, match="header"):
        read_channel(p)
    with pytest.raises(DataError, match="not found"):
        read_channel(tmp_path / "missing.csv")


def test_slot_means():
    ts = np.array([0, 60, 900, 2000], dtype=float)
    power = np.array([10.0, 20.0, 30.0, 40.0])
    out = slot_means(ts, power, 0, 3)
    assert out.tolist() == [15.0, 30.0, 40.0]
    assert np.isnan(slot_means(ts, power, 0, 4)[3])


def test_fill_gaps_policy():
    nan = np.nan
    v, rep = fill_gaps(np.array([nan, 5.0, nan, nan, 7.0, nan, nan, nan, 1.0]), step=900)
    assert v.tolist() == [5.0, 5.0, 5.0, 5.0, 7.0, 0.0, 0.0, 0.0, 1.0]
    assert rep.filled_slots == 3 and rep.zeroed_slots == 3
    assert rep.filled_energy_wh == pytest.approx(15 * 0.25)
    assert rep.degraded_days == (0,)


@settings(max_examples=200)
@given(st.lists(st.one_of(st.none(), st.floats(0, 100, allow_nan=False)), min_size=1, max_size=300))
def test_fill_gaps_properties(raw):
    values = np.array([np.nan if x is None else x for x in raw])
    out, rep = fill_gaps(values)
    assert not np.isnan(out).any()
    known = ~np.isnan(values)
    np.testing.assert_array_equal(out[known], values[known])
    assert rep.filled_slots + rep.zeroed_slots == int((~known).sum())
    assert bool(rep.degraded_days) == (rep.zeroed_slots > 0)


def test_load_channels_and_split(tmp_path):
    (tmp_path / "channels.csv").write_text(MAP)
    n = 3 * 1440
    kettle = np.zeros(n)
    kettle[420:425] = 1800.0
    write_channel(tmp_path / "k.csv", SampledSeries(MONDAY, 60, kettle))
    write_channel(tmp_path / "l.csv", SampledSeries(MONDAY, 60, np.full(n, 10.0)))
    rows = [(T0 + 60 * i, 500.0) for i in range(n) if not 1500 <= i < 1600]   # long gap on day 2
    write_rows(tmp_path / "s.csv", rows)
    data = load_channels(tmp_path, load_channel_map(tmp_path / "channels.csv"))
    assert data.n_days == 3 and data.aggregate.start == dt.datetime.combine(MONDAY, dt.time())
    assert data.degraded_days == (MONDAY + dt.timedelta(days=1),)
    assert data.per_category[Category.COOKING].values[28] == pytest.approx(500 + 1800 * 5 / 15)
    np.testing.assert_allclose(data.aggregate.values,
                               data.per_category[Category.COOKING].values + data.per_category[Category.LIGHT].values)
    mask = data.valid_mask()
    assert mask.sum() == 2 * 96 and not mask[96:192].any()
    train, test = split_train_test(data, 2, 1)
    assert isinstance(train, Dataset) and train.n_days == 2 and test.n_days == 1
    assert train.degraded_days == (MONDAY + dt.timedelta(days=1),) and test.degraded_days == ()
    with pytest.raises(DataError):
        split_train_test(data, 3, 1)


def test_empty_channel_is_zero(tmp_path, caplog):
    (tmp_path / "channels.csv").write_text("channel,appliance,category\na,kettle,Cooking\nb,tv,Entertainment\n")
    write_channel(tmp_path / "a.csv", SampledSeries(MONDAY, 60, np.ones(1440)))
    write_rows(tmp_path / "b.csv", [])
    data = load_channels(tmp_path, load_channel_map(tmp_path / "channels.csv"))
    assert data.per_category[Category.ENTERTAINMENT].values.sum() == 0
    assert "empty" in caplog.text


def test_default_split():
    assert default_split(150) == (100, 50)
    assert default_split(2) == (1, 1)
    with pytest.raises(DataError):
        default_split(1)
    s = SampledSeries(MONDAY, 900, np.zeros(96 * 6))
    train, test = split_train_test(s)
    assert (train.n_days, test.n_days) == (4, 2)
    assert test.start == dt.datetime.combine(MONDAY + dt.timedelta(days=4), dt.time())
