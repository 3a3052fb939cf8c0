import json

import pytest

from nextdoor.bootstrap import BELOW_CUTOFF
from nextdoor.report import (ModelColumn, NextDoorReport, read_report, render_csv, render_text,
                             write_report)


def _report(proximal=True):
    names = ["a", "b", "c"]
    base = ModelColumn("base", [], 0.1, {"a": 1.0, "b": -0.5, "c": 0.0}, 0.2, 0.61, 0.62, 0.5)
    cols = []
    if proximal:
        cols = [
            ModelColumn("a", ["a"], 0.1, {"a": 0.0, "b": -0.3, "c": 0.4}, 0.1, 1.0, 1.1, 0.9,
                        1.0, 0.01, 0.01, 0.0),
            ModelColumn("b", ["b"], 0.1, {"a": 0.9, "b": 0.0, "c": 0.0}, 0.1, 0.6, 0.6, 0.55,
                        0.03, 0.4, BELOW_CUTOFF, 0.7),
        ]
    return NextDoorReport("gaussian", names, [0.2, 0.1], 1, base, cols, [3, 7], ["hello"])


def test_json_round_trip(tmp_path):
    r = _report()
    path = tmp_path / "r.json"
    write_report(r, path, "json")
    assert read_report(path) == r
    d = json.loads(path.read_text())
    assert set(d) >= {"base", "proximal"}
    assert set(d["proximal"][0]) >= {"cv_error", "debiased_error", "selection_frequency",
                                     "model_pvalue", "model_score", "post_selection_pvalue"}


def test_text_layout():
    text = render_text(_report())
    lines = text.splitlines()
    header = next(ln for ln in lines if "base" in ln)
    # proximal columns by ascending de-biased error: b (0.6) before a (1.1)
    assert header.split() == ["base", "b", "a"]
    cv = next(ln for ln in lines if ln.startswith("cv_error"))
    assert cv.split()[1] == "0.610"
    assert "below-cutoff" in text
    assert "note: hello" in text
    # coefficient rows: excluded predictors first, then others that appear
    rows = [ln.split()[0] for ln in lines if ln[:1].isalpha()]
    assert rows.index("b") < rows.index("a") < rows.index("c")


def test_zero_coefficients_blank():
    lines = render_text(_report()).splitlines()
    c_row = next(ln for ln in lines if ln.startswith("c "))
    assert c_row.split() == ["c", "0.400"]


def test_empty_selection_notice():
    text = render_text(_report(proximal=False))
    assert "no predictors selected" in text


def test_csv_shape():
    rows = render_csv(_report()).strip().splitlines()
    assert rows[0] == "row,base,b,a"
    assert any(r.startswith("model pvalue,,0.4,0.01") for r in rows)


def test_bad_format_and_path(tmp_path):
    with pytest.raises(ValueError):
        write_report(_report(), tmp_path / "x", "xml")
    with pytest.raises(OSError):
        write_report(_report(), tmp_path / "missing" / "x.json", "json")
