import json
import math

import pytest

from untangle_eval.errors import InvalidInput
from untangle_eval.report import SCHEMA_VERSION, dumps, dumps_csv, new_report


def test_new_report_has_all_sections_explicit():
    report = new_report(["eval", "--seed", "3"], 3, "0.1.0")
    assert report["schema_version"] == SCHEMA_VERSION
    for section in ("metrics", "per_severity", "correlations", "disentanglement", "per_sample"):
        assert section in report and report[section] is None
    assert report["config"]["invocation"] == ["eval", "--seed", "3"]
    assert report["config"]["seed"] == 3


def test_dumps_sorted_keys_and_parseable():
    text = dumps({"b": 1, "a": {"z": None, "y": True}})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": {"y": True, "z": None}, "b": 1}


def test_dumps_float_rule_17_significant_digits():
    text = dumps({"x": 0.1})
    assert "0.10000000000000001" in text
    assert json.loads(dumps({"x": 1.0 / 3.0}))["x"] == 1.0 / 3.0


def test_dumps_nan_and_inf_become_null():
    parsed = json.loads(dumps({"a": math.nan, "b": math.inf}))
    assert parsed == {"a": None, "b": None}


def test_dumps_deterministic_bytes():
    report = new_report(["x"], 0, "0.1.0")
    report["metrics"] = {"m": 0.12345678901234567, "list": [1, 2.5, None]}
    assert dumps(report) == dumps(report)


def test_dumps_rejects_non_string_keys_and_unknown_types():
    with pytest.raises(InvalidInput):
        dumps({1: "x"})
    with pytest.raises(InvalidInput):
        dumps({"x": object()})


def test_csv_flattening():
    report = {"metrics": {"a": 0.5, "b": None}, "rows": [1, 2]}
    text = dumps_csv(report)
    lines = text.strip().splitlines()
    assert lines[0] == "key,value"
    assert "metrics.a,0.5" in lines
    assert "metrics.b," in lines
    assert "rows[0],1" in lines and "rows[1],2" in lines


def test_csv_quoting():
    text = dumps_csv({"weird,key": 'va"lue'})
    assert '"weird,key"' in text
    assert '"va""lue"' in text
