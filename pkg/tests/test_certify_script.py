# tests/test_certify_script.py
import json

import pandas as pd

from scripts.certify import Options, certify_gadgets, export, parse_instances


def test_parse_instances():
    assert parse_instances("2x4, 3X2") == [(2, 4), (3, 2)]


def test_gadget_rows_match_direct_count():
    rows = certify_gadgets(Options(instances=[(2, 4), (3, 2)]))
    assert rows
    assert all(r["passed"] for r in rows)
    n4 = [r for r in rows if r["t"] == 2 and r["slice"] == 1]
    assert n4[0]["matchings"] == 60
    assert n4[0]["r"] == 3
    assert n4[0]["gadget_matchings"] == 60
    assert n4[0]["roundtrip"] and n4[0]["falikman"] and n4[0]["bregman"]


def test_hypergrid_rows_are_certified():
    rows = certify_gadgets(Options(instances=[(3, 2), (4, 2), (5, 2)]))
    got = {(r["t"], r["slice"]): r for r in rows}
    assert set(got) == {(3, 1), (4, 2), (5, 3)}
    for (t, _), row in got.items():
        assert row["gadget"] == "snmf"
        assert row["matchings"] == row["direct"] == row["gadget_matchings"] == t
        assert row["roundtrip"] is True
        assert row["falikman"] is True
        assert row["bregman"] is True
        assert row["passed"]


def test_export_small(tmp_path):
    out_json, out_csv = tmp_path / "certify.json", tmp_path / "certify.csv"
    failed = export(Options(instances=[(2, 3), (3, 2)]), out_json, out_csv)
    assert failed == 0
    doc = json.loads(out_json.read_text(encoding="utf-8"))
    assert doc["meta"]["failed"] == 0
    assert "generated_at" in doc["meta"]
    sections = {r["section"] for r in doc["results"]}
    assert sections == {"counts", "gadgets", "layers", "bounds"}
    assert not pd.read_csv(out_csv).empty
