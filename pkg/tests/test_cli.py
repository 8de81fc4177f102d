# tests/test_cli.py
import io
import json
import math
from fractions import Fraction

import pandas as pd
import pytest

from scdkit.cli import jsonify, parse_pairs, parse_params, run
from scdkit.errors import InvalidParameterError


def run_json(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_levels(capsys):
    code, payload, _ = run_json(capsys, "levels", "--t", "3", "--n", "2")
    assert code == 0
    assert payload == [1, 2, 3, 2, 1]


def test_count_both(capsys):
    code, payload, _ = run_json(capsys, "count", "--t", "2", "--n", "3", "--method", "both",
                                "--no-cache", "--threads", "1")
    assert code == 0
    assert payload == {"oracle": 6, "layered": 6, "agree": True}


def test_count_hypergrid_layered(capsys):
    code, payload, _ = run_json(capsys, "count", "--t", "3", "--n", "2", "--threads", "1")
    assert code == 0
    assert payload == {"layered": 6}


def test_construct_then_validate(capsys, tmp_path):
    path = tmp_path / "gk3.json"
    code, payload, _ = run_json(capsys, "construct", "--n", "3", "--method", "gk", "--out", str(path))
    assert code == 0
    assert payload["chains"] == 3
    code, payload, _ = run_json(capsys, "validate", "--in", str(path))
    assert code == 0
    assert payload["ok"] is True
    assert payload["profile"] == {"4": 1, "2": 2}


def test_construct_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["construct", "--poset", "hypergrid", "--t", "3", "--n", "3", "--method", "btk",
                    "--out", str(path)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_validate_reports_violations(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"poset": {"kind": "boolean", "t": 2, "n": 2}, "chains": [[0, 1], [2, 3]]}))
    code, payload, _ = run_json(capsys, "validate", "--in", str(path))
    assert code == 1
    assert payload["ok"] is False
    assert {v["condition"] for v in payload["violations"]} == {"not_symmetric"}


def test_validate_missing_file(capsys, tmp_path):
    code = run(["validate", "--in", str(tmp_path / "nope.json")])
    _, err = capsys.readouterr()
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "schema"


def test_validate_rejects_non_integer_coordinates(capsys, tmp_path):
    path = tmp_path / "letters.json"
    path.write_text(json.dumps({"poset": {"kind": "hypergrid", "t": 3, "n": 2}, "chains": [[["a", "b"]]]}))
    code = run(["validate", "--in", str(path), "--format", "json"])
    _, err = capsys.readouterr()
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "schema"


def test_usage_errors(capsys):
    assert run(["count"]) == 2
    assert run([]) == 2
    assert run(["bounds", "--formula", "lemma3", "--params", "a=1,b=2", "--format", "json"]) == 2
    capsys.readouterr()


def test_budget_exit_code(capsys):
    code = run(["count", "--t", "2", "--n", "7", "--method", "oracle"])
    _, err = capsys.readouterr()
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["error"] == "budget_exceeded"


def test_bounds_csv_default(capsys):
    code = run(["bounds", "--formula", "lemma3", "--params", "a=1,b=2,r=2"])
    out, _ = capsys.readouterr()
    assert code == 0
    table = pd.read_csv(io.StringIO(out))
    assert list(table.columns)[:4] == ["formula", "params", "log_lower", "log_upper"]
    assert table.loc[0, "log_lower"] == pytest.approx(-2.6137, abs=1e-4)


def test_bounds_thm1_json(capsys):
    code, payload, _ = run_json(capsys, "bounds", "--formula", "thm1", "--params", "n=4",
                                "--format", "json", "--no-cache", "--threads", "1")
    assert code == 0
    assert payload["inside_sandwich"] is True
    assert payload["exact_log_count"] == pytest.approx(math.log(240))


def test_bounds_thm2_from_snmf(capsys):
    code, payload, _ = run_json(capsys, "bounds", "--formula", "thm2", "--params", "t=3,n=2",
                                "--format", "json", "--threads", "1")
    assert code == 0
    assert payload["log_lower"] == pytest.approx(-4.992, abs=1e-3)
    assert payload["inside_sandwich"] is True


def test_gadget_dump_and_perm(capsys, tmp_path):
    path = tmp_path / "m.json"
    code, payload, _ = run_json(capsys, "gadget", "--t", "2", "--n", "4", "--slice", "1",
                                "--dump", str(path), "--threads", "1")
    assert code == 0
    assert payload["r"] == 3
    assert payload["matchings"] == 60
    assert payload["doubly_stochastic"] is True
    code, payload, _ = run_json(capsys, "perm", "--in", str(path), "--threads", "1")
    assert code == 0
    assert payload["value"] == "20/19683"
    assert payload["falikman"]["passed"] is True


def test_gadget_not_regular(capsys):
    code = run(["gadget", "--t", "3", "--n", "2", "--slice", "0", "--format", "json"])
    _, err = capsys.readouterr()
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"] == "not_regular"


def test_gadget_snmf_hypergrid(capsys):
    code, payload, _ = run_json(capsys, "gadget", "--t", "3", "--n", "2", "--slice", "1", "--snmf",
                                "--threads", "1")
    assert code == 0
    assert payload["mode"] == "snmf"
    assert payload["doubly_stochastic"] is True


def test_snmf_minimize(capsys, tmp_path):
    out = tmp_path / "flow.json"
    code, payload, _ = run_json(capsys, "snmf", "--t", "2", "--n", "4", "--minimize-max",
                                "--pairs", "1..2", "--out", str(out), "--threads", "1")
    assert code == 0
    assert payload["W"] == "1/2"
    assert payload["valid"] is True
    assert [p["i"] for p in payload["pairs"]] == [1, 2]
    assert json.loads(out.read_text())["pairs"][0]["i"] == 1


def test_sample_is_reproducible(capsys):
    argv = ["sample", "--t", "2", "--n", "3", "--seed", "7", "--count", "3", "--threads", "1"]
    assert run(argv) == 0
    first, _ = capsys.readouterr()
    assert run(argv) == 0
    second, _ = capsys.readouterr()
    assert first == second
    payload = json.loads(first)
    assert payload["total"] == 6
    assert len(payload["samples"]) == 3


def test_parsers():
    assert parse_params("a=4,b=6,r=3") == {"a": 4, "b": 6, "r": 3}
    assert parse_params("t=3,n=4,W=1/2:1/3") == {"t": 3, "n": 4, "W": [Fraction(1, 2), Fraction(1, 3)]}
    assert parse_params(None) == {}
    with pytest.raises(InvalidParameterError):
        parse_params("a")
    with pytest.raises(InvalidParameterError):
        parse_params("a=x")
    assert parse_pairs("1..3") == (1, 3)
    assert parse_pairs("2") == (2, 2)
    with pytest.raises(InvalidParameterError):
        parse_pairs("a..b")


def test_jsonify_large_integers():
    assert jsonify(2**53 - 1) == 2**53 - 1
    assert jsonify(2**53) == str(2**53)
    assert jsonify({"x": Fraction(1, 3), "ok": True}) == {"x": "1/3", "ok": True}


def test_threads_do_not_change_output(capsys):
    outputs = []
    for threads in ("1", "2", "8"):
        assert run(["count", "--t", "3", "--n", "3", "--no-cache", "--threads", threads]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1] == outputs[2]


def test_cache_dir_flag(capsys, tmp_path):
    cache_dir = tmp_path / "layers"
    assert run(["count", "--t", "2", "--n", "4", "--cache-dir", str(cache_dir), "--threads", "1"]) == 0
    capsys.readouterr()
    assert list(cache_dir.glob("*.sqlite"))
