import json
import math
import os

import numpy as np
import pytest

from henondim import io as hio
from henondim.algebra import MapError, henon


def test_fixtures_load(fixtures):
    assert fixtures["H1"] == henon([-6, 0, 1], 0.3)
    assert fixtures["H2"] == henon([-10, 0, 1], 1.0)
    assert fixtures["H3"] == henon([0, 0, 1], 0.01)
    with pytest.raises(KeyError):
        hio.fixture_text("H9")


def test_map_file_round_trip(tmp_path, h1):
    path = tmp_path / "m.json"
    path.write_text(hio.canonical_json(h1.describe()))
    assert hio.load_map(path) == h1
    assert hio.resolve_map(str(path)) == h1
    assert hio.resolve_map("H1") == h1


@pytest.mark.parametrize(
    "doc,match",
    [
        ([], "factors"),
        ({"factors": []}, "non-empty"),
        ({"factors": [{"coeffs": [0, 0, 1]}]}, "factor 0"),
        ({"factors": [{"coeffs": [0, 0, 1], "a": 0}]}, "factor 0"),
    ],
)
def test_parse_errors(doc, match):
    with pytest.raises(MapError, match=match):
        hio.parse_map(doc)


def test_unreadable_and_invalid_files(tmp_path):
    with pytest.raises(MapError, match="cannot read"):
        hio.load_map(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(MapError, match="not valid JSON"):
        hio.load_map(bad)


def test_to_jsonable_types():
    out = hio.to_jsonable({"c": 1 + 2j, "x": np.float64("nan"), "v": np.arange(2), "b": np.bool_(True)})
    assert out == {"c": [1.0, 2.0], "x": None, "v": [0, 1], "b": True}
    with pytest.raises(TypeError):
        hio.to_jsonable(object())


def test_canonical_json_is_sorted_and_stable():
    a = hio.canonical_json({"b": 1, "a": [math.inf, 0.5]})
    assert a == hio.canonical_json({"a": [math.inf, 0.5], "b": 1})
    assert json.loads(a) == {"a": [None, 0.5], "b": 1}


def test_hashes(h1, h2):
    assert hio.map_hash(h1) == hio.map_hash(henon([-6, 0, 1], 0.3))
    assert hio.map_hash(h1) != hio.map_hash(h2)
    assert len(hio.config_hash({"x": 1})) == 16
    head = hio.header(h1, {"x": 1}, 7)
    assert head["seed"] == 7 and head["tool"] == "henondim"


def test_write_atomic_replaces_and_cleans(tmp_path, monkeypatch):
    path = tmp_path / "sub" / "f.txt"
    hio.write_atomic(path, "one")
    hio.write_atomic(path, "two")
    assert path.read_text() == "two"

    def fail(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", fail)
    with pytest.raises(OSError):
        hio.write_atomic(path, "three")
    assert path.read_text() == "two"
    assert sorted(p.name for p in path.parent.iterdir()) == ["f.txt"]


def test_csv_header_and_cells(tmp_path):
    head = {"tool": "henondim", "seed": 0}
    path = hio.write_csv(tmp_path / "t.csv", head, ["a", "b"], [(1.5, 2j), (math.nan, "x")])
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# seed: 0", "# tool: henondim"]
    assert lines[2] == "a,b"
    assert lines[3] == '1.5,"[0.0, 2.0]"'
    assert lines[4] == "nan,x"


def test_write_json_has_header(tmp_path):
    path = hio.write_json(tmp_path / "r.json", {"seed": 1}, {"value": 2})
    assert json.loads(path.read_text()) == {"header": {"seed": 1}, "value": 2}
