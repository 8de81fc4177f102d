# scdkit/cache.py
"""
層ごとの σ → 完成数 テーブルの永続キャッシュ（SQLite）。

ファイル: <cache_dir>/<poset descriptor の SHA1>.sqlite
σ は canonical order の index 列を uint32 のバイト列で保存する。
完成数は 64bit を超えるので 10 進文字列で保存する。
"""
from __future__ import annotations

import json
import logging
import os
import sqlite3
from pathlib import Path

import numpy as np

from scdkit.config import get_settings
from scdkit.poset_core import GradedPoset

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DDL = """
CREATE TABLE IF NOT EXISTS meta (
  key TEXT PRIMARY KEY,
  value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS completions (
  layer INTEGER NOT NULL,
  sigma BLOB NOT NULL,
  count TEXT NOT NULL,
  PRIMARY KEY (layer, sigma)
);
"""

Sigma = tuple[int, ...]


def encode_sigma(sigma: Sigma) -> bytes:
    return np.asarray(sigma, dtype=np.uint32).tobytes()


def decode_sigma(raw: bytes) -> Sigma:
    return tuple(int(v) for v in np.frombuffer(raw, dtype=np.uint32))


class LayerCache:
    def __init__(self, cache_dir: Path | str | None = None):
        self.cache_dir = Path(cache_dir) if cache_dir is not None else get_settings().cache_dir

    def path_for(self, poset: GradedPoset) -> Path:
        return self.cache_dir / f"{poset.content_key()}.sqlite"

    def load(self, poset: GradedPoset) -> list[dict[Sigma, int]] | None:
        """完全に書き込まれたテーブルだけを返す。無ければ None"""
        path = self.path_for(poset)
        if not path.exists():
            return None
        try:
            with sqlite3.connect(str(path)) as conn:
                meta = dict(conn.execute("SELECT key, value FROM meta").fetchall())
                if meta.get("complete") != "1" or int(meta.get("schema", 0)) != SCHEMA_VERSION:
                    logger.warning(f"キャッシュが不完全なため無視します: {path}")
                    return None
                layers = int(meta["layers"])
                tables: list[dict[Sigma, int]] = [dict() for _ in range(layers)]
                for layer, sigma, count in conn.execute("SELECT layer, sigma, count FROM completions"):
                    tables[layer][decode_sigma(sigma)] = int(count)
        except (sqlite3.DatabaseError, KeyError, ValueError) as e:
            logger.warning(f"キャッシュを読み込めません（{path}）: {e}")
            return None
        logger.info(f"キャッシュ読み込み: {path.name} 層数={layers}")
        return tables

    def save(self, poset: GradedPoset, tables: list[dict[Sigma, int]]) -> Path:
        path = self.path_for(poset)
        os.makedirs(path.parent, exist_ok=True)
        with sqlite3.connect(str(path)) as conn:
            conn.executescript(DDL)
            conn.execute("DELETE FROM meta")
            conn.execute("DELETE FROM completions")
            rows = [
                (layer, encode_sigma(sigma), str(count))
                for layer, table in enumerate(tables)
                for sigma, count in sorted(table.items())
            ]
            conn.executemany(
                "INSERT OR IGNORE INTO completions (layer, sigma, count) VALUES (?, ?, ?)", rows
            )
            conn.executemany(
                "INSERT OR REPLACE INTO meta (key, value) VALUES (?, ?)",
                [
                    ("schema", str(SCHEMA_VERSION)),
                    ("descriptor", json.dumps(poset.descriptor(), sort_keys=True)),
                    ("layers", str(len(tables))),
                    ("complete", "1"),
                ],
            )
        logger.info(f"キャッシュ書き込み: {path.name} 行数={len(rows)}")
        return path
