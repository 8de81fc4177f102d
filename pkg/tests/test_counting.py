# tests/test_counting.py
import math
import random
from collections import Counter

import pytest

from scdkit.bounds import lemma3_bounds
from scdkit.cache import LayerCache
from scdkit.counting import (
    compute_layered_tables,
    count_scd_layered,
    count_scd_oracle,
    count_scd_threelevel,
    glued_poset,
    iter_glued_posets,
    middle_levels,
    sample_scd_uniform,
    start_states,
)
from scdkit.errors import BudgetExceededError
from scdkit.gadget import ThreeLevelPoset, build_gadget_regular, three_level_slice
from scdkit.scd_core import enumerate_scds, validate_scd


@pytest.mark.parametrize("n, count", [(1, 1), (2, 2), (3, 6), (4, 240)])
def test_oracle_boolean(boolean, n, count):
    assert count_scd_oracle(boolean(n)) == count


def test_oracle_hypergrid(grid):
    assert count_scd_oracle(grid(3, 2)) == 6
    assert count_scd_oracle(grid(3, 1)) == 1


def test_oracle_guard(boolean):
    with pytest.raises(BudgetExceededError):
        count_scd_oracle(boolean(6))


@pytest.mark.parametrize("n, count", [(1, 1), (2, 2), (3, 6), (4, 240)])
def test_layered_boolean(boolean, n, count):
    assert count_scd_layered(boolean(n), workers=1) == count


@pytest.mark.parametrize("t, n", [(3, 1), (3, 2), (3, 3), (4, 2), (5, 2)])
def test_layered_agrees_with_oracle(grid, t, n):
    p = grid(t, n)
    assert count_scd_layered(p, workers=1) == count_scd_oracle(p)


def test_start_states(boolean, grid):
    assert start_states(boolean(4)) == [(0, 1, 2, 3, 4, 5)]
    # n=3: L_1 と L_2 の間の完全マッチングは 2 つ
    assert len(start_states(boolean(3))) == 2
    assert middle_levels(boolean(3)) == (1, 2, 1)
    assert middle_levels(grid(3, 2)) == (2, 2, 2)


def test_layered_is_deterministic(boolean, grid):
    assert count_scd_layered(boolean(4), workers=2) == 240
    for seed in (1, 2, 3):
        assert count_scd_layered(boolean(4), workers=1, shuffle_seed=seed) == 240
    a = compute_layered_tables(grid(3, 3), workers=1)
    b = compute_layered_tables(grid(3, 3), workers=1, shuffle_seed=5)
    assert a.completions == b.completions


def test_state_cap(boolean):
    with pytest.raises(BudgetExceededError):
        count_scd_layered(boolean(4), workers=1, state_cap=1)


def test_layer_tables_boolean4(boolean):
    tables = compute_layered_tables(boolean(4), workers=1)
    assert tables.layers == 2
    assert tables.total == 240
    (start,) = tables.starts
    assert tables.completions[0][start] == 240
    # 最外層の各状態は 1 × 4 の gadget でマッチング 4 通り
    assert set(tables.completions[1].values()) == {4}


def test_glued_posets_are_regular_boolean(boolean):
    p = boolean(4)
    m = 2
    for layer, sigma, p3 in iter_glued_posets(p, compute_layered_tables(p, workers=1)):
        g = build_gadget_regular(p3)
        assert g.r == m + layer + 1
        count = count_scd_threelevel(p3)
        assert lemma3_bounds(p3.a, p3.b, g.r).contains(math.log(count))


def test_glued_poset_layer0_is_slice(boolean):
    p = boolean(4)
    glued = glued_poset(p, 0, start_states(p)[0])
    sliced = three_level_slice(p, 1)
    assert glued.xy == sliced.xy
    assert glued.yz == sliced.yz
    assert count_scd_threelevel(glued) == 60


def test_threelevel_zero():
    p3 = ThreeLevelPoset(x_labels=("x",), y_labels=("y1", "y2"), z_labels=("z",),
                         xy=((),), yz=((0,), (0,)))
    assert count_scd_threelevel(p3) == 0


def test_cache_roundtrip(boolean, tmp_path):
    cache = LayerCache(tmp_path / "layers")
    p = boolean(4)
    assert count_scd_layered(p, workers=1, cache=cache) == 240
    assert cache.path_for(p).exists()
    loaded = cache.load(p)
    assert loaded == compute_layered_tables(p, workers=1).completions
    assert count_scd_layered(p, workers=1, cache=cache) == 240


def test_sample_is_a_valid_scd(boolean, grid):
    for p in (boolean(1), boolean(2), boolean(4), grid(3, 2), grid(4, 2)):
        scd = sample_scd_uniform(p, seed=11)
        assert validate_scd(p, scd).ok


def test_sample_is_deterministic(grid):
    p = grid(3, 3)
    assert sample_scd_uniform(p, seed=42) == sample_scd_uniform(p, seed=42)


def test_sample_is_uniform(boolean):
    p = boolean(3)
    tables = compute_layered_tables(p, workers=1)
    rng = random.Random(12345)
    counts = Counter(sample_scd_uniform(p, tables=tables, rng=rng).chains for _ in range(6000))
    assert set(counts) == {s.chains for s in enumerate_scds(p)}
    assert all(850 <= c <= 1150 for c in counts.values())


@pytest.mark.slow
def test_layered_boolean5(boolean):
    tables = compute_layered_tables(boolean(5), workers=2)
    assert tables.total > 0
    assert tables.total == compute_layered_tables(boolean(5), workers=1).total
