from datetime import datetime, timedelta, timezone

import pytest

from asdf.tags.core import Software, HistoryEntry

from gffdetect import util


def test_splitmix64_is_64_bit():
    values = [util.splitmix64(i) for i in range(100)]
    assert all(0 <= v < 2 ** 64 for v in values)
    assert len(set(values)) == 100


def test_derive_seed_deterministic_and_distinct():
    assert util.derive_seed(42, 3) == util.derive_seed(42, 3)
    seeds = {util.derive_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert util.derive_seed(1, 0) != util.derive_seed(2, 0)


def test_derive_seed_separates_master_seeds():
    first = {util.derive_seed(0, i) for i in range(256)}
    second = {util.derive_seed(1, i) for i in range(256)}
    assert not first & second
    assert all(0 <= s < 2 ** 63 for s in first | second)


def test_get_envar_as_int(monkeypatch):
    assert util.get_envar_as_int("GFFDETECT_JOBS", 3) == 3
    monkeypatch.setenv("GFFDETECT_JOBS", "4")
    assert util.get_envar_as_int("GFFDETECT_JOBS", 3) == 4


@pytest.mark.parametrize("value", ["four", "0", "-2"])
def test_get_envar_as_int_invalid(monkeypatch, value):
    monkeypatch.setenv("GFFDETECT_JOBS", value)
    with pytest.raises(ValueError, match="GFFDETECT_JOBS"):
        util.get_envar_as_int("GFFDETECT_JOBS", 1)


def test_create_history_entry():
    entry = util.create_history_entry("trained 3 epochs")
    assert isinstance(entry, HistoryEntry)
    assert entry["description"] == "trained 3 epochs"
    assert "software" not in entry
    assert abs(datetime.now(timezone.utc).replace(tzinfo=None) - entry["time"]) < timedelta(minutes=1)


def test_create_history_entry_with_software():
    software = {"name": "gffdetect", "author": "gffdetect developers", "version": "1.0"}
    entry = util.create_history_entry("saved model", software)
    assert isinstance(entry["software"], Software)
    assert entry["software"]["name"] == "gffdetect"

    entry = util.create_history_entry("saved model", [software, software])
    assert len(entry["software"]) == 2
