import json

import jsonschema
import numpy as np
import pandas as pd
import pytest

from nph2ph.results.store_output import (
    NON_FINITE,
    atomic_write_text,
    clean_report,
    generate_path_output,
    store_report,
    store_series,
    validate_report,
)


def test_clean_report_nulls_non_finite():
    doc = {
        "a": 1.5,
        "b": [np.float64(np.nan), 2, np.int64(3)],
        "c": {"d": np.inf, "e": True, "f": "text", "g": None},
    }
    cleaned, reasons = clean_report(doc, {"/c/d": "no_changepoint"})
    assert cleaned == {"a": 1.5, "b": [None, 2, 3], "c": {"d": None, "e": True, "f": "text", "g": None}}
    assert reasons == {"/b/0": NON_FINITE, "/c/d": "no_changepoint"}
    assert isinstance(cleaned["b"][2], int)
    json.dumps(cleaned, allow_nan=False)


def test_clean_report_rejects_unknown_types():
    with pytest.raises(TypeError):
        clean_report({"a": object()})


def test_generate_path_output(tmp_path):
    path = generate_path_output(tmp_path / "outputs", "long")
    assert path.is_dir()
    assert path == tmp_path / "outputs" / "long"
    assert generate_path_output(tmp_path / "outputs", "long") == path


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    target = tmp_path / "report.json"
    atomic_write_text(target, "first")
    atomic_write_text(target, "second")
    assert target.read_text() == "second"
    assert [p.name for p in tmp_path.iterdir()] == ["report.json"]


def test_store_series(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 0.5], "value": [1.0 / 3.0, np.nan]})
    name = store_series(tmp_path, "curve", frame)
    assert name == "curve.tsv"
    lines = (tmp_path / name).read_text().splitlines()
    assert lines[0] == "t\tvalue"
    assert lines[2] == "0.5\tnan"
    assert float(lines[1].split("\t")[1]) == 1.0 / 3.0


def test_validate_report_rejects_incomplete_document():
    with pytest.raises(jsonschema.ValidationError):
        validate_report({"tool": "nph2ph"})


def test_store_report_refuses_invalid_document(tmp_path):
    with pytest.raises(jsonschema.ValidationError):
        store_report(tmp_path, {"tool": "nph2ph", "seed": 1})
    assert not (tmp_path / "report.json").exists()
