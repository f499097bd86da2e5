from __future__ import annotations

import json
import math

from fujita_lab.evolution import Outcome
from fujita_lab.io import atomic_write_csv, atomic_write_json, csv_text, dumps_json


def test_json_is_sorted_and_clean(tmp_path):
    path = atomic_write_json(tmp_path / "a" / "x.json", {"b": math.nan, "a": math.inf, "c": Outcome.GLOBAL})
    data = json.loads(path.read_text())
    assert list(data) == ["a", "b", "c"]
    assert data == {"a": "inf", "b": None, "c": "GLOBAL"}
    assert dumps_json({"z": 1, "y": 2}) == dumps_json({"y": 2, "z": 1})


def test_csv_uses_lf_and_plain_values(tmp_path):
    text = csv_text(("a", "b", "c"), [(1.5, None, True), (Outcome.BLOWUP, 2, False)])
    assert text == "a,b,c\n1.5,,true\nBLOWUP,2,false\n"
    path = atomic_write_csv(tmp_path / "x.csv", ("a",), [(1,)])
    assert path.read_bytes() == b"a\n1\n"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    for k in range(3):
        atomic_write_json(tmp_path / "x.json", {"k": k})
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
