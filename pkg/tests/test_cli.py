import csv
import io
import json
import subprocess
import sys

import pytest

from bergkern import cli
from bergkern.errors import WindowError

GINIBRE1 = {"variant": "radial", "d": 1, "profile": {"terms": [{"exponent": 2, "coefficient": 1.0}]}}


def _config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_command(tmp_path, capsys):
    code, _, err = _run(["frobnicate", "--config", _config(tmp_path, {})], capsys)
    assert code == 2
    rec = json.loads(err)
    assert rec["exit_code"] == 2 and rec["schema"] == cli.SCHEMA


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = _run(["kernel", "--config", str(bad)], capsys)
    assert code == 2
    assert "error" in json.loads(err)


def test_missing_field(tmp_path, capsys):
    code, _, err = _run(["variance", "--config", _config(tmp_path, {"model": GINIBRE1})], capsys)
    assert code == 2


def test_n_list_must_increase(tmp_path, capsys):
    doc = {"model": GINIBRE1, "mode": "erfc_normal", "direction": [1], "n_list": [64, 32, 256]}
    code, _, _ = _run(["edge-limit", "--config", _config(tmp_path, doc)], capsys)
    assert code == 2


def test_numeric_failure_exit_code(tmp_path, capsys, monkeypatch):
    def boom(cfg, ctx):
        raise WindowError("erfc argument outside the window")

    monkeypatch.setitem(cli.HANDLERS, "droplet", boom)
    code, _, err = _run(["droplet", "--config", _config(tmp_path, {"model": GINIBRE1})], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "WindowError"


def test_degree_cap_is_validation(tmp_path, capsys):
    q = [{"px": 2, "py": 0, "coefficient": 1.0}, {"px": 0, "py": 2, "coefficient": 1.0}]
    doc = {"method": "gram_vs_extremal", "Q": q, "n": 20, "m": 200}
    code, _, err = _run(["partial-kernel", "--config", _config(tmp_path, doc)], capsys)
    assert code == 2
    assert "cap" in json.loads(err)["message"]


def test_json_envelope_and_echo(tmp_path, capsys):
    cfg = _config(tmp_path, {"model": GINIBRE1, "n": 64, "a": 0.8})
    code, out, _ = _run(["variance", "--config", cfg], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "bergkern/1"
    assert doc["command"] == "variance"
    # defaults are echoed
    assert doc["config"]["seed"] == 0 and doc["config"]["threads"] == 1
    assert doc["config"]["n"] == 64
    assert doc["rows"][0]["method"] == "bernoulli_exact"


def test_flags_override_config(tmp_path, capsys):
    cfg = _config(tmp_path, {"model": GINIBRE1, "n": 64, "a": 0.8, "seed": 3})
    _, out, _ = _run(["variance", "--config", cfg, "--n", "32", "--seed", "9"], capsys)
    doc = json.loads(out)
    assert doc["config"]["n"] == 32 and doc["config"]["seed"] == 9
    assert doc["rows"][0]["n"] == 32


def test_json_round_trip(tmp_path):
    summary = {"max": 0.125, "tiny": 1e-300, "label": "x", "flag": True, "values": [1.5, -2.0]}
    buf = io.StringIO()
    cli.emit_report("droplet", {"n": 1}, [], summary, fmt="json", stream=buf)
    assert json.loads(buf.getvalue())["summary"] == summary


def test_empty_rows_csv(tmp_path):
    out = tmp_path / "r.csv"
    paths = cli.emit_report("droplet", {"n": 1}, [], {"ok": 1}, out=out, fmt="csv")
    assert out.read_text().strip() == ""
    side = json.loads(paths[1].read_text())
    assert side["summary"] == {"ok": 1}


def test_csv_columns_and_precision(tmp_path):
    rows = [{"n": 4, "value": 1 / 3}, {"n": 8, "value": 0.1, "extra": "a,b"}]
    text = cli.rows_to_csv(rows)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0]) == ["n", "value", "extra"]
    assert float(parsed[0]["value"]) == 1 / 3
    assert parsed[1]["extra"] == "a,b"


def test_variance_csv_columns(tmp_path, capsys):
    cfg = _config(tmp_path, {"model": GINIBRE1, "n": 64, "deltas": [-1, 0, 1]})
    out = tmp_path / "v.csv"
    code, _, _ = _run(["variance", "--config", cfg, "--format", "csv", "--out", str(out)], capsys)
    assert code == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[:8] == ["n", "d", "delta", "method", "mean", "variance", "limit_value", "ratio"]
    assert (tmp_path / "v.summary.json").exists()


def test_deterministic_bytes(tmp_path, capsys):
    cfg = _config(tmp_path, {"model": GINIBRE1, "n": 64, "a": 0.8, "methods": ["monte_carlo"],
                             "trials": 20000, "seed": 4})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    _run(["variance", "--config", cfg, "--out", str(a)], capsys)
    _run(["variance", "--config", cfg, "--out", str(b), "--threads", "3"], capsys)
    doc_a, doc_b = json.loads(a.read_text()), json.loads(b.read_text())
    assert doc_a["rows"] == doc_b["rows"]
    _run(["variance", "--config", cfg, "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = _config(tmp_path, {"model": GINIBRE1, "n": 16, "a": 0.8})
    code, _, err = _run(["variance", "--config", cfg, "--out", str(blocker / "x.json")], capsys)
    assert code == 2
    assert str(blocker) in json.loads(err)["message"]


def test_obstacle_example(capsys):
    code, out, _ = _run(["obstacle", "--config", "configs/obstacle_quadratic.json"], capsys)
    assert code == 0
    assert json.loads(out)["summary"]["max_deviation"] <= 1e-8


def test_droplet(tmp_path, capsys):
    cfg = _config(tmp_path, {"model": GINIBRE1, "points": [[[0.5, 0.0]], [[1.5, 0.0]]]})
    code, out, _ = _run(["droplet", "--config", cfg], capsys)
    assert code == 0
    assert len(json.loads(out)["rows"]) == 2


def test_console_script_module():
    proc = subprocess.run([sys.executable, "-m", "bergkern.cli", "identity-check", "--config",
                           "configs/identity_reproducing.json"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["summary"]["status"] == "PASS"
