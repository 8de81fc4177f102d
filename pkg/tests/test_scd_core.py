# tests/test_scd_core.py
import json

import pytest

from scdkit.errors import ForeignElementError, SchemaError
from scdkit.poset_core import level_sizes
from scdkit.scd_core import (
    Scd,
    chain_profile,
    count_scds_bruteforce,
    dumps_canonical,
    enumerate_scds,
    expected_profile,
    scd_from_json_dict,
    scd_to_json_dict,
    validate_scd,
)


def conditions(report):
    return {v.condition for v in report.violations}


def test_valid_scd_n2(boolean):
    scd = Scd.from_chains([[2], [0, 1, 3]], 2)
    assert scd.chains == ((0, 1, 3), (2,))
    report = validate_scd(boolean(2), scd)
    assert report.ok
    assert report.to_json_dict() == {"ok": True, "violations": []}


def test_not_symmetric(boolean):
    report = validate_scd(boolean(2), Scd.from_chains([[0, 1], [2, 3]], 2))
    assert not report.ok
    assert conditions(report) == {"not_symmetric"}
    assert len(report.violations) == 2


def test_partition_violations(boolean):
    report = validate_scd(boolean(2), Scd.from_chains([[0, 1, 3], [1]], 2))
    assert conditions(report) == {"not_disjoint", "not_covering"}


def test_cover_step_and_chain_count(boolean):
    report = validate_scd(boolean(2), Scd.from_chains([[0, 3], [1], [2]], 2))
    assert conditions(report) == {"not_cover_step", "chain_count"}


def test_empty_chain_reported(boolean):
    report = validate_scd(boolean(1), Scd.from_chains([[0, 1], []], 1))
    assert "empty_chain" in conditions(report)


def test_foreign_element_raises(boolean):
    with pytest.raises(ForeignElementError):
        validate_scd(boolean(2), Scd.from_chains([[0, 1, 3], [8]], 2))


def test_profiles():
    assert expected_profile([1, 4, 6, 4, 1]) == {5: 1, 3: 3, 1: 2}
    assert expected_profile([1, 2, 3, 2, 1]) == {5: 1, 3: 1, 1: 1}
    assert expected_profile(level_sizes(2, 3)) == {4: 1, 2: 2}
    scd = Scd.from_chains([[0, 1, 3], [2]], 2)
    assert chain_profile(scd) == {3: 1, 1: 1}


@pytest.mark.parametrize("n, count", [(1, 1), (2, 2), (3, 6), (4, 240)])
def test_enumerate_boolean(boolean, n, count):
    p = boolean(n)
    scds = list(enumerate_scds(p))
    assert len(scds) == count
    assert len({s.chains for s in scds}) == count
    for s in scds:
        assert validate_scd(p, s).ok
        assert chain_profile(s) == expected_profile(p.level_sizes())


def test_enumerate_hypergrid(grid):
    p = grid(3, 2)
    scds = list(enumerate_scds(p))
    assert len(scds) == 6
    assert all(validate_scd(p, s).ok for s in scds)


@pytest.mark.parametrize("n, count", [(1, 1), (2, 2), (3, 6), (4, 240)])
def test_bruteforce_count_boolean(boolean, n, count):
    assert count_scds_bruteforce(boolean(n)) == count


def test_bruteforce_matches_enumeration(grid):
    p = grid(4, 2)
    assert count_scds_bruteforce(p) == sum(1 for _ in enumerate_scds(p))


def test_json_roundtrip_is_canonical(boolean):
    p = boolean(3)
    scd = next(enumerate_scds(p))
    doc = scd_to_json_dict(p, scd)
    text = dumps_canonical(doc)
    assert text == dumps_canonical(json.loads(text))
    q, back = scd_from_json_dict(json.loads(text))
    assert q.levels == p.levels
    assert back == scd


def test_json_schema_errors():
    with pytest.raises(SchemaError):
        scd_from_json_dict({"chains": []})
    with pytest.raises(SchemaError):
        scd_from_json_dict({"poset": {"kind": "boolean", "t": 2, "n": 2}, "chains": [["a"]]})
