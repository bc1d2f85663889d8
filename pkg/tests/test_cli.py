import csv
import io
import json

import numpy as np
import pytest

from martinet.cli import dispatch
from martinet.serialize import dumps_csv, dumps_json, flatten, to_plain


def run(capsys, *argv):
    code = dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_distance_example(capsys):
    code, out, _ = run(capsys, "distance", "--alpha", "2", "--from", "0,0,0", "--to", "1,0,0")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "ok"
    assert doc["result"]["delta"]["total"] == 1.0
    lo, up = doc["result"]["bracket"]
    assert lo == 1.0 and up <= 1.0 + 1e-9
    assert doc["config"]["alpha"] == 2.0 and doc["config"]["segments"] == 8


def test_chain_example(capsys):
    code, out, _ = run(capsys, "chain", "--alpha", "1", "--from", "1,0", "--to", "2,1", "--case", "char")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["tau"] == [pytest.approx(2 / 3, abs=1e-15)]
    assert doc["result"]["endpoint_err"] <= 1e-9


def test_trace_deterministic(capsys):
    argv = ["trace", "--alpha", "2", "--p", "2", "--function", "gauss", "--samples", "200000", "--seed", "7"]
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0 and out1 == out2
    doc = json.loads(out1)
    assert doc["config"]["seed"] == 7 and doc["result"]["ratio"] > 0


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "ball", "--bogus", "1")
    assert code == 2 and "usage" in err


def test_unknown_command(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["distance", "--alpha", "0.5"],
    ["ball", "--r", "0"],
    ["trace", "--p", "1"],
    ["chain", "--case", "other"],
    ["mu", "--format", "xml"],
    ["distance", "--from", "1,2"],
])
def test_validation_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_config_file_under_flags(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bundle\nalpha = 3\nsamples=500\nseed = 4\n")
    code, out, _ = run(capsys, "ballbox-audit", "--config", str(cfg), "--seed", "9")
    doc = json.loads(out)
    assert code == 0
    assert doc["config"]["alpha"] == 3.0 and doc["config"]["samples"] == 500 and doc["config"]["seed"] == 9


def test_config_file_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nope = 1\n")
    code, _, err = run(capsys, "mu", "--config", str(cfg))
    assert code == 2 and "nope" in err


def test_threads_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("MARTINET_THREADS", "3")
    _, out, _ = run(capsys, "ballbox-audit", "--samples", "10")
    assert json.loads(out)["config"]["threads"] == 3
    _, out, _ = run(capsys, "ballbox-audit", "--samples", "10", "--threads", "2")
    assert json.loads(out)["config"]["threads"] == 2


def test_csv_output_to_file(capsys, tmp_path):
    path = tmp_path / "chain.csv"
    code, out, _ = run(capsys, "chain", "--alpha", "2", "--from", "1,0", "--to", "2,1",
                       "--format", "csv", "--output", str(path))
    assert code == 0 and out == ""
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert list(rows[0]) == ["piece", "t", "x", "y", "z"]
    assert float(rows[-1]["x"]) == pytest.approx(2.0) and abs(float(rows[-1]["z"])) < 1e-12


def test_ahlfors_inconclusive_exit_code(capsys):
    code, out, _ = run(capsys, "ahlfors", "--alpha", "2", "--samples", "2000")
    doc = json.loads(out)
    assert code == 3 and doc["status"] == "inconclusive" and doc["result"]["violations"] == 0


def test_mu_and_ball(capsys):
    code, out, _ = run(capsys, "mu", "--at", "1,0", "--r", "0.5", "--samples", "40000")
    assert code == 0 and json.loads(out)["result"]["within_ci"]
    code, out, _ = run(capsys, "ball", "--at", "1,0,0", "--r", "0.5", "--samples", "40000")
    res = json.loads(out)["result"]
    assert code == 0 and res["volume_exact"] == pytest.approx(1 / 24)
    assert abs(res["volume_mc"]["value"] - res["volume_exact"]) <= 2 * res["volume_mc"]["half_width"]


def test_serialize_helpers():
    assert to_plain({"a": np.float64(np.inf), "b": np.arange(2), "c": (np.bool_(True),)}) == \
        {"a": "inf", "b": [0, 1], "c": [True]}
    assert dumps_json({"b": 1, "a": float("nan")}) == '{\n  "a": "nan",\n  "b": 1\n}\n'
    assert flatten({"x": {"y": 1}, "z": [1, 2]}) == {"x.y": 1, "z": "[1, 2]"}
    assert dumps_csv([{"a": 1, "b": {"c": 2}}, {"a": 3}]) == "a,b.c\n1,2\n3,\n"
