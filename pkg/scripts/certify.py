#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
小さな poset で数え上げと上下界をまとめて検算し、JSON と CSV に書き出すバッチ。

- counts   : 総当たりと層別計数の一致（2^[n], [t]^n）
- gadgets  : スライスごとのマッチング数 = 3 レベル SCD 数、Falikman / Brégman 証明書
- layers   : 層別計数で現れた全ての貼り合わせ poset が 3 レベルの上下界に入るか
- bounds   : poset 全体の ln count が上下界に入るか

使い方例はファイル末尾に記載。
"""
from __future__ import annotations

import argparse
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import pandas as pd

from scdkit.bounds import lemma3_bounds, layered_bregman_upper, theorem1_bounds, trivial_upper
from scdkit.config import setup_logging
from scdkit.counting import (
    compute_layered_tables,
    count_scd_oracle,
    count_scd_threelevel,
    iter_glued_posets,
)
from scdkit.errors import NotRegularError
from scdkit.gadget import (
    WeightedBigraph,
    build_gadget_regular,
    build_gadget_snmf,
    matching_to_scd,
    scd_to_matching,
    three_level_slice,
)
from scdkit.permanent import bregman_certificate, falikman_certificate, iter_perfect_matchings, permanent_ryser
from scdkit.poset_core import build_poset
from scdkit.scd_core import count_scds_bruteforce, validate_scd
from scdkit.snmf import compute_snmf, restrict_to_three_level

logger = logging.getLogger(__name__)


def now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S%z")


def parse_instances(raw: str) -> list[tuple[int, int]]:
    """'2x4,3x2' → [(2, 4), (3, 2)]"""
    out = []
    for item in raw.split(","):
        t, n = item.strip().lower().split("x")
        out.append((int(t), int(n)))
    return out


@dataclass
class Options:
    instances: list[tuple[int, int]] = field(default_factory=lambda: [(2, 1), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (4, 2)])
    gadget_max_size: int = 12
    workers: int = 1


# ---------------------------
# 各検算
# ---------------------------
def certify_counts(opts: Options) -> list[dict[str, Any]]:
    rows = []
    for t, n in opts.instances:
        kind = "boolean" if t == 2 else "hypergrid"
        poset = build_poset(kind, t, n)
        tables = compute_layered_tables(poset, workers=opts.workers)
        oracle = count_scd_oracle(poset)
        rows.append({
            "section": "counts", "kind": kind, "t": t, "n": n,
            "oracle": oracle, "layered": tables.total, "passed": oracle == tables.total,
        })
        logger.info(f"[counts] {kind} t={t} n={n}: oracle={oracle} layered={tables.total}")
    return rows


def check_roundtrip(g: WeightedBigraph) -> tuple[int, bool]:
    """gadget の全完全マッチングについて マッチング → SCD → マッチング が一致するか"""
    count, ok = 0, True
    for m in iter_perfect_matchings(g.adjacency()):
        count += 1
        scd = matching_to_scd(g, m)
        ok = ok and validate_scd(g.p3, scd).ok and scd_to_matching(g, scd) == m
    return count, ok


def certify_gadgets(opts: Options) -> list[dict[str, Any]]:
    """
    対称なスライス（|X| = |Z|）ごとに gadget を作って証明書を確認する。
    正則でなければ poset 全体の SNMF を制限した重みで gadget を作る。
    """
    rows = []
    for t, n in opts.instances:
        kind = "boolean" if t == 2 else "hypergrid"
        poset = build_poset(kind, t, n)
        snmf = None
        for i in range(poset.total_rank - 1):
            p3 = three_level_slice(poset, i)
            if len(p3.z_labels) != p3.a or p3.a + p3.b > opts.gadget_max_size:
                continue
            matchings = count_scd_threelevel(p3)
            direct = count_scds_bruteforce(p3)
            row = {
                "section": "gadgets", "kind": kind, "t": t, "n": n, "slice": i,
                "a": p3.a, "b": p3.b, "matchings": matchings, "direct": direct,
            }
            try:
                g = build_gadget_regular(p3)
                row["r"] = g.r
            except NotRegularError:
                if snmf is None:
                    snmf = compute_snmf(poset, workers=opts.workers)
                g = build_gadget_snmf(p3, *restrict_to_three_level(snmf, poset, p3))
            matrix = g.matrix()
            gadget_matchings, roundtrip = check_roundtrip(g)
            falikman = falikman_certificate(matrix, permanent_ryser(matrix, workers=opts.workers))
            bregman = bregman_certificate(g.adjacency(), gadget_matchings)
            row.update({
                "gadget": g.mode, "gadget_matchings": gadget_matchings, "roundtrip": roundtrip,
                "falikman": falikman.passed, "bregman": bregman.passed,
            })
            # 重み 0 の辺は台から落ちるので、gadget のマッチング数は SCD 数以下
            row["passed"] = (
                matchings == direct and 0 < gadget_matchings <= direct
                and roundtrip and falikman.passed and bregman.passed
            )
            logger.info(f"[gadgets] {kind} t={t} n={n} slice={i}: {g.mode} matchings={gadget_matchings}/{direct}")
            rows.append(row)
    return rows


def certify_layers(opts: Options) -> list[dict[str, Any]]:
    """2^[n] の各層の貼り合わせ poset は r = m+s の正則。3 レベルの上下界に入るか"""
    rows = []
    for t, n in opts.instances:
        if t != 2:
            continue
        poset = build_poset("boolean", 2, n)
        tables = compute_layered_tables(poset, workers=opts.workers)
        for layer, sigma, p3 in iter_glued_posets(poset, tables):
            if p3.a >= p3.b:
                continue
            g = build_gadget_regular(p3)
            count = count_scd_threelevel(p3)
            inside = lemma3_bounds(p3.a, p3.b, g.r).contains(math.log(count))
            rows.append({
                "section": "layers", "kind": "boolean", "t": 2, "n": n, "layer": layer + 1,
                "sigma": list(sigma), "a": p3.a, "b": p3.b, "r": g.r, "matchings": count, "passed": inside,
            })
    return rows


def certify_bounds(opts: Options, counts: list[dict[str, Any]]) -> list[dict[str, Any]]:
    rows = []
    for row in counts:
        t, n, count = row["t"], row["n"], row["layered"]
        log_count = math.log(count)
        checks = [trivial_upper(t, n), layered_bregman_upper(t, n)]
        if t == 2:
            checks.append(theorem1_bounds(n))
        for bound in checks:
            rows.append({
                "section": "bounds", "t": t, "n": n, "formula": bound.formula,
                "log_lower": bound.log_lower, "log_upper": bound.log_upper,
                "log_count": log_count, "passed": bound.contains(log_count),
            })
    return rows


# ---------------------------
# 書き出し
# ---------------------------
def export(opts: Options, out_json: Path, out_csv: Path | None) -> int:
    counts = certify_counts(opts)
    rows = counts + certify_gadgets(opts) + certify_layers(opts) + certify_bounds(opts, counts)
    failed = [r for r in rows if not r["passed"]]

    doc = {
        "results": [{k: (str(v) if isinstance(v, int) and not isinstance(v, bool) and v > 2**53 else v)
                     for k, v in r.items()} for r in rows],
        "meta": {
            "instances": [f"{t}x{n}" for t, n in opts.instances],
            "gadget_max_size": opts.gadget_max_size,
            "failed": len(failed),
            "generated_at": now_iso(),
        },
    }
    out_json.parent.mkdir(parents=True, exist_ok=True)
    with open(out_json, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=2)

    if out_csv is not None:
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).drop(columns=["sigma"], errors="ignore").to_csv(out_csv, index=False)

    for r in failed:
        logger.warning(f"検算失敗: {r}")
    return len(failed)


# ---------------------------
# CLI
# ---------------------------
def main():
    ap = argparse.ArgumentParser(description="Certify exact SCD counts against bounds on small posets.")
    ap.add_argument("out_json", help="Output JSON path (e.g., data/out/certify.json)")
    ap.add_argument("--csv", default=None, help="表を CSV でも書き出す")
    ap.add_argument("--instances", default=None, help="t x n をカンマ区切り（例: 2x4,3x2）")
    ap.add_argument("--gadget-max-size", type=int, default=12, help="gadget 検算の a+b の上限")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    setup_logging()
    opts = Options(gadget_max_size=args.gadget_max_size, workers=args.threads)
    if args.instances:
        opts.instances = parse_instances(args.instances)

    failed = export(opts, Path(args.out_json), Path(args.csv) if args.csv else None)
    print(f"[certify] failed={failed} → {args.out_json}")
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()

# 使い方例:
#   python -m scripts.certify data/out/certify.json --csv data/out/certify.csv
#   python -m scripts.certify data/out/small.json --instances 2x3,3x2
