# tests/test_cache.py
import sqlite3

from scdkit.cache import LayerCache, decode_sigma, encode_sigma
from scdkit.poset_core import build_poset


def test_sigma_bytes():
    sigma = (3, 0, 2, 1)
    raw = encode_sigma(sigma)
    assert len(raw) == 16
    assert decode_sigma(raw) == sigma


def test_save_and_load(tmp_path):
    p = build_poset("hypergrid", 3, 2)
    cache = LayerCache(tmp_path)
    tables = [{(0, 1, 2): 6}, {(1, 0): 2, (0, 1): 2}]
    path = cache.save(p, tables)
    assert path.name == f"{p.content_key()}.sqlite"
    assert cache.load(p) == tables


def test_large_counts_survive(tmp_path):
    p = build_poset("boolean", 2, 2)
    cache = LayerCache(tmp_path)
    big = 3**80
    cache.save(p, [{(0, 1): big}])
    assert cache.load(p) == [{(0, 1): big}]


def test_incomplete_file_is_ignored(tmp_path):
    p = build_poset("boolean", 2, 3)
    cache = LayerCache(tmp_path)
    cache.save(p, [{(0, 1, 2): 6}])
    with sqlite3.connect(str(cache.path_for(p))) as conn:
        conn.execute("UPDATE meta SET value = '0' WHERE key = 'complete'")
    assert cache.load(p) is None


def test_missing_and_corrupt(tmp_path):
    p = build_poset("boolean", 2, 3)
    cache = LayerCache(tmp_path)
    assert cache.load(p) is None
    cache.path_for(p).write_bytes(b"not a database")
    assert cache.load(p) is None


def test_resave_replaces_rows(tmp_path):
    p = build_poset("boolean", 2, 3)
    cache = LayerCache(tmp_path)
    cache.save(p, [{(0, 1): 1, (1, 0): 1}])
    cache.save(p, [{(0, 1): 5}])
    assert cache.load(p) == [{(0, 1): 5}]


def test_default_dir_from_settings(tmp_path):
    # conftest が SCDKIT_CACHE を一時ディレクトリへ向けている
    assert LayerCache().cache_dir == tmp_path / "cache"
