import json

import numpy as np
import pandas as pd
import pytest

from nextdoor.cli import main, parse_exclusions
from nextdoor.simulation import COLUMNS

FAST = ["--H", "60", "--B", "40", "--boot-freq", "4", "--nlambda", "20"]


@pytest.fixture
def csv_path(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 4))
    df = pd.DataFrame(X, columns=["a", "b", "c", "d"])
    df["y"] = 2 * X[:, 0] + rng.standard_normal(60)
    path = tmp_path / "train.csv"
    df.to_csv(path, index=False)
    return path


def test_parse_exclusions():
    assert parse_exclusions("a,b;c") == (("a", "b"), ("c",))
    assert parse_exclusions("") == ()


def test_analyze_json(csv_path, tmp_path):
    out = tmp_path / "r.json"
    rc = main(["analyze", "--data", str(csv_path), "--response", "y", "--out", str(out),
               "--format", "json", "--exclude", "b,c"] + FAST)
    assert rc == 0
    d = json.loads(out.read_text())
    assert "a" in [c["label"] for c in d["proximal"]]
    assert "b+c" in [c["label"] for c in d["proximal"]]


def test_analyze_text_stdout(csv_path, capsys):
    assert main(["analyze", "--data", str(csv_path), "--response", "y"] + FAST) == 0
    assert "debiased_error" in capsys.readouterr().out


def test_same_seed_same_bytes(csv_path, tmp_path):
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"r{jobs}.json"
        main(["analyze", "--data", str(csv_path), "--response", "y", "--out", str(out),
              "--format", "json", "--seed", "5", "--jobs", jobs] + FAST)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["analyze", "--response", "y"],
    ["analyze", "--data", "x.csv"],
    ["analyze", "--data", "x.csv", "--response", "y", "--folds", "5", "--fold-col", "f"],
    ["analyze", "--data", "x.csv", "--response", "y", "--criterion", "median"],
    ["simulate", "--design", "nope"],
    ["simulate", "--signal-grid", "a,b", "--reps", "1"],
    ["simulate", "--methods", "bogus", "--reps", "1"],
    ["nested", "--data", "x.csv", "--response", "y"],
])
def test_usage_errors(argv):
    assert main(argv) == 1


def test_data_errors(csv_path, tmp_path):
    assert main(["analyze", "--data", str(tmp_path / "missing.csv"), "--response", "y"]) == 2
    assert main(["analyze", "--data", str(csv_path), "--response", "zz"] + FAST) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,2\nfoo,3\n")
    assert main(["analyze", "--data", str(bad), "--response", "y"] + FAST) == 2


def test_simulate_csv_and_png(tmp_path):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--reps", "2", "--H", "40", "--B", "30", "--nlambda", "15",
               "--boot-freq", "3", "--methods", "model_pvalue,naive", "--out", str(out)])
    assert rc == 0
    t = pd.read_csv(out)
    assert list(t.columns) == COLUMNS
    assert set(t.method) == {"model_pvalue", "naive"}
    assert out.with_suffix(".png").stat().st_size > 0


def test_simulate_power_stdout(capsys):
    rc = main(["simulate", "--reps", "1", "--H", "40", "--B", "30", "--nlambda", "15",
               "--methods", "naive", "--signal-grid", "0,1"])
    assert rc == 0
    assert capsys.readouterr().out.splitlines()[0] == ",".join(COLUMNS)


def test_nested(tmp_path):
    out = tmp_path / "nested.csv"
    rc = main(["nested", "--data", "builtin:prostate", "--test-data", "builtin:prostate-test",
               "--response", "lpsa", "--out", str(out)] + FAST)
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,test_error" and len(lines) >= 2
    assert out.with_suffix(".png").exists()
