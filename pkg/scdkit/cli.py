# scdkit/cli.py
"""
scdkit のコマンドライン。stdout はデータ、stderr はログとエラー。

終了コード: 0 成功 / 1 検証失敗 / 2 使い方・パラメータの誤り / 3 上限超過
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import random
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import pandas as pd

from scdkit.bounds import (
    LogBound,
    bounds_table,
    layer_cap,
    layered_bregman_upper,
    lemma3_bounds,
    lemma8_lower,
    theorem1_bounds,
    theorem2_lower,
    trivial_upper,
)
from scdkit.cache import LayerCache
from scdkit.config import get_settings, setup_logging
from scdkit.counting import (
    compute_layered_tables,
    count_scd_layered,
    count_scd_oracle,
    count_scd_threelevel,
    sample_scd_uniform,
)
from scdkit.errors import InvalidParameterError, SchemaError, ScdkitError
from scdkit.gadget import build_gadget_regular, build_gadget_snmf, matrix_from_json_dict, three_level_slice
from scdkit.permanent import bregman_certificate, falikman_certificate, permanent_ryser
from scdkit.poset_core import build_poset, level_sizes
from scdkit.scd_construct import btk_boolean, btk_decomposition, gk_decomposition
from scdkit.scd_core import (
    chain_profile,
    dumps_canonical,
    scd_from_json_dict,
    scd_to_json_dict,
    validate_scd,
)
from scdkit.snmf import (
    compute_snmf,
    layer_max_weights,
    minimize_max_weight,
    required_pairs,
    restrict_to_three_level,
    validate_snmf,
)

logger = logging.getLogger(__name__)

# JSON の数値として安全に表せる整数の上限。これを超える整数は 10 進文字列にする
JSON_SAFE_INT = 2**53 - 1

# 厳密な数を添えるのはこの要素数まで（層別計数が数秒で終わる範囲）
EXACT_COUNT_MAX_ELEMENTS = 30


# ----------------------------------
# 出力
# ----------------------------------
def jsonify(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, int):
        return value if abs(value) <= JSON_SAFE_INT else str(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    if isinstance(value, dict):
        return {str(k): jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def emit(payload: Any, fmt: str, table: pd.DataFrame | None = None) -> None:
    if fmt == "csv":
        if table is None:
            flat = payload if isinstance(payload, dict) else {"value": payload}
            table = pd.DataFrame([{k: json.dumps(jsonify(v)) if isinstance(v, (dict, list)) else jsonify(v)
                                   for k, v in flat.items()}])
        table.to_csv(sys.stdout, index=False, lineterminator="\n")
        return
    sys.stdout.write(json.dumps(jsonify(payload), ensure_ascii=False) + "\n")


def emit_error(err: ScdkitError, fmt: str) -> None:
    if fmt == "json":
        sys.stderr.write(json.dumps(jsonify(err.to_dict()), ensure_ascii=False) + "\n")
    else:
        logger.error(f"{err.code}: {err.message}")


# ----------------------------------
# 引数の解釈
# ----------------------------------
def parse_number(raw: str) -> int | Fraction | float:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise InvalidParameterError(f"数値として解釈できません: {raw!r}", value=raw)


def parse_params(raw: str | None) -> dict[str, Any]:
    """'a=4,b=6,r=3' / 'W=1/2:1/3'（':' 区切りは列）"""
    params: dict[str, Any] = {}
    if not raw:
        return params
    for item in raw.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise InvalidParameterError(f"k=v の形式ではありません: {item!r}", item=item)
        key, value = (s.strip() for s in item.split("=", 1))
        if ":" in value:
            params[key] = [parse_number(v) for v in value.split(":") if v.strip()]
        else:
            params[key] = parse_number(value)
    return params


def parse_pairs(raw: str | None) -> tuple[int, int] | None:
    """'a..b' または 'a'"""
    if raw is None:
        return None
    try:
        if ".." in raw:
            lo, hi = raw.split("..", 1)
            return int(lo), int(hi)
        return int(raw), int(raw)
    except ValueError:
        raise InvalidParameterError(f"--pairs は a..b の形式で指定してください: {raw!r}", pairs=raw)


def kind_for(t: int, kind: str | None) -> str:
    if kind:
        return kind
    return "boolean" if t == 2 else "hypergrid"


def layer_cache(args: argparse.Namespace) -> LayerCache | None:
    if args.no_cache:
        return None
    return LayerCache(args.cache_dir or get_settings().cache_dir)


def exact_log_count(t: int, n: int, workers: int, cache: LayerCache | None) -> float | None:
    """小さい poset だけ厳密な ln count を返す"""
    if t**n > EXACT_COUNT_MAX_ELEMENTS:
        return None
    poset = build_poset(kind_for(t, None), t, n)
    return math.log(count_scd_layered(poset, workers=workers, cache=cache))


def require(params: dict[str, Any], *keys: str) -> list[Any]:
    missing = [k for k in keys if k not in params]
    if missing:
        raise InvalidParameterError(f"--params に {', '.join(missing)} が必要です", missing=missing)
    return [params[k] for k in keys]


# ----------------------------------
# サブコマンド
# ----------------------------------
def cmd_levels(args, workers: int):
    sizes = level_sizes(args.t, args.n)
    table = pd.DataFrame({"rank": range(len(sizes)), "size": sizes})
    return sizes, table, 0


def cmd_construct(args, workers: int):
    kind = args.poset
    t = 2 if kind == "boolean" else args.t
    if args.method == "gk":
        if kind != "boolean":
            raise InvalidParameterError("gk はブール束専用です（--poset boolean）", method="gk")
        scd = gk_decomposition(args.n)
    elif kind == "boolean":
        scd = btk_boolean(args.n)
    else:
        scd = btk_decomposition(t, args.n)
    poset = build_poset(kind, t, args.n)
    doc = scd_to_json_dict(poset, scd)
    profile = chain_profile(scd)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(dumps_canonical(doc), encoding="utf-8")
        logger.info(f"SCD を書き出しました: {args.out}（鎖 {len(scd)} 本）")
        summary = {"out": args.out, "chains": len(scd), "profile": profile}
        return summary, None, 0
    return doc, None, 0


def cmd_validate(args, workers: int):
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"SCD JSON を読み込めません: {e}", path=args.input)
    poset, scd = scd_from_json_dict(doc)
    report = validate_scd(poset, scd)
    payload = {**report.to_json_dict(), "chains": len(scd)}
    if report.ok:
        payload["profile"] = chain_profile(scd)
    table = pd.DataFrame(
        [{"chain": v.chain_index, "condition": v.condition, "message": v.message} for v in report.violations],
        columns=["chain", "condition", "message"],
    )
    return payload, table, 0 if report.ok else 1


def cmd_count(args, workers: int):
    poset = build_poset(kind_for(args.t, args.kind), args.t, args.n)
    payload: dict[str, Any] = {}
    if args.method in ("oracle", "both"):
        payload["oracle"] = count_scd_oracle(poset)
    if args.method in ("layered", "both"):
        payload["layered"] = count_scd_layered(poset, workers=workers, cache=layer_cache(args))
    code = 0
    if args.method == "both":
        payload["agree"] = payload["oracle"] == payload["layered"]
        code = 0 if payload["agree"] else 1
    return payload, None, code


def cmd_gadget(args, workers: int):
    poset = build_poset(kind_for(args.t, args.kind), args.t, args.n)
    p3 = three_level_slice(poset, args.slice)
    if args.snmf:
        snmf = compute_snmf(poset, (args.slice, args.slice + 1), workers=workers)
        g = build_gadget_snmf(p3, *restrict_to_three_level(snmf, poset, p3))
    else:
        g = build_gadget_regular(p3)
    matrix = g.matrix()
    adj = g.adjacency()
    count = count_scd_threelevel(p3)
    payload = {
        "slice": args.slice,
        "a": p3.a,
        "b": p3.b,
        "r": g.r,
        "mode": g.mode,
        "size": g.size,
        "doubly_stochastic": matrix.is_doubly_stochastic(),
        "matchings": count,
        "bregman": bregman_certificate(adj, count).to_json_dict(),
    }
    if args.dump:
        Path(args.dump).parent.mkdir(parents=True, exist_ok=True)
        Path(args.dump).write_text(dumps_canonical(matrix.to_json_dict()), encoding="utf-8")
        payload["dump"] = args.dump
    return payload, None, 0


def cmd_perm(args, workers: int):
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"行列 JSON を読み込めません: {e}", path=args.input)
    matrix = matrix_from_json_dict(doc)
    result = permanent_ryser(matrix, arithmetic=args.mode, workers=workers)
    payload: dict[str, Any] = {
        "size": matrix.size,
        "mode": args.mode,
        "value": result.value,
        "approx": float(result.value),
        "doubly_stochastic": matrix.is_doubly_stochastic(),
    }
    code = 0
    if result.exact and payload["doubly_stochastic"]:
        cert = falikman_certificate(matrix, result)
        payload["falikman"] = cert.to_json_dict()
        code = 0 if cert.passed else 1
    return payload, None, code


def _thm2_weights(t: int, n: int, workers: int) -> tuple[list[Fraction], Fraction | None]:
    """下界に使う層の W_s を、最大重みを最小化した SNMF から求める"""
    poset = build_poset(kind_for(t, None), t, n)
    pairs = required_pairs(poset, layer_cap(t, n))
    m_total = poset.total_rank
    if not pairs:
        return [], None
    snmf, _ = minimize_max_weight(poset, (min(pairs), max(pairs)), workers=workers)
    w_middle = snmf.pairs[m_total // 2].max_weight if m_total % 2 and m_total // 2 in snmf.pairs else None
    weights = layer_max_weights(poset, snmf)
    return weights, w_middle


def cmd_bounds(args, workers: int):
    params = parse_params(args.params)
    cache = layer_cache(args)
    log_count = None
    formula = args.formula
    if formula == "lemma3":
        a, b, r = require(params, "a", "b", "r")
        bound: LogBound = lemma3_bounds(int(a), int(b), int(r))
    elif formula == "lemma8":
        a, b, w = require(params, "a", "b", "W")
        bound = lemma8_lower(int(a), int(b), w)
    elif formula == "thm1":
        (n,) = require(params, "n")
        bound = theorem1_bounds(int(n))
        log_count = exact_log_count(2, int(n), workers, cache)
    elif formula == "thm2":
        t, n = (int(v) for v in require(params, "t", "n"))
        if "W" in params:
            w = params["W"] if isinstance(params["W"], list) else [params["W"]]
            w_middle = params.get("W_middle")
        else:
            w, w_middle = _thm2_weights(t, n, workers)
        bound = theorem2_lower(t, n, w, w_middle)
        log_count = exact_log_count(t, n, workers, cache)
    elif formula == "trivial":
        t, n = (int(v) for v in require(params, "t", "n"))
        bound = trivial_upper(t, n)
        log_count = exact_log_count(t, n, workers, cache)
    else:
        t, n = (int(v) for v in require(params, "t", "n"))
        bound = layered_bregman_upper(t, n)
        log_count = exact_log_count(t, n, workers, cache)

    table = bounds_table([(bound, log_count)])
    payload = {
        "formula": bound.formula,
        "params": bound.params,
        "log_lower": bound.log_lower,
        "log_upper": bound.log_upper,
        "extras": bound.extras,
        "exact_log_count": log_count,
        "inside_sandwich": None if log_count is None else bound.contains(log_count),
    }
    code = 1 if payload["inside_sandwich"] is False else 0
    return payload, table, code


def cmd_snmf(args, workers: int):
    poset = build_poset(kind_for(args.t, args.kind), args.t, args.n)
    level_range = parse_pairs(args.pairs)
    if args.minimize_max:
        snmf, w = minimize_max_weight(poset, level_range, workers=workers)
    else:
        snmf = compute_snmf(poset, level_range, workers=workers)
        w = snmf.max_weight()
    report = validate_snmf(poset, snmf)
    rows = [
        {
            "i": p.i,
            "lower_size": p.lower_size,
            "upper_size": p.upper_size,
            "max_weight": str(p.max_weight),
            "optimum": None if p.optimum is None else str(p.optimum),
        }
        for _, p in sorted(snmf.pairs.items())
    ]
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(dumps_canonical(snmf.to_json_dict(poset)), encoding="utf-8")
    payload = {"W": w, "valid": report.ok, "violations": report.violations, "pairs": rows}
    if args.out:
        payload["out"] = args.out
    return payload, pd.DataFrame(rows), 0 if report.ok else 1


def cmd_sample(args, workers: int):
    poset = build_poset(kind_for(args.t, args.kind), args.t, args.n)
    tables = compute_layered_tables(poset, workers=workers, cache=layer_cache(args))
    rng = random.Random(args.seed)
    samples = []
    code = 0
    for _ in range(args.count):
        scd = sample_scd_uniform(poset, tables=tables, rng=rng)
        if not validate_scd(poset, scd).ok:
            code = 1
        samples.append(scd_to_json_dict(poset, scd)["chains"])
    payload = {"poset": poset.descriptor(), "seed": args.seed, "total": tables.total, "samples": samples}
    return payload, None, code


COMMANDS = {
    "levels": cmd_levels,
    "construct": cmd_construct,
    "validate": cmd_validate,
    "count": cmd_count,
    "gadget": cmd_gadget,
    "perm": cmd_perm,
    "bounds": cmd_bounds,
    "snmf": cmd_snmf,
    "sample": cmd_sample,
}

# --format を省略したときの既定値
DEFAULT_FORMATS = {"bounds": "csv"}


# ----------------------------------
# パーサ
# ----------------------------------
def _global_options(p: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--format", choices=["json", "csv"], default=default, help="出力形式")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="WARNING 未満のログを出さない")
    p.add_argument("--threads", type=int, default=default, help="worker 数の上限（既定: 全コア）")
    p.add_argument("--cache-dir", dest="cache_dir", default=default,
                   help="層別計数キャッシュの場所（既定: SCDKIT_CACHE / 設定ファイル）")
    p.add_argument("--no-cache", dest="no_cache", action="store_true",
                   default=argparse.SUPPRESS if suppress else False, help="キャッシュを使わない")


def _poset_options(p: argparse.ArgumentParser, t_default: int | None = None) -> None:
    p.add_argument("--t", type=int, required=t_default is None, default=t_default)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=["boolean", "hypergrid"], default=None,
                   help="既定: t=2 なら boolean、それ以外は hypergrid")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scdkit", description="対称鎖分解の構成・検証・数え上げ・上下界")
    _global_options(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        return p

    p = add("levels", "各レベルの大きさ")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("construct", "参照 SCD（gk / btk）を構成する")
    p.add_argument("--poset", choices=["boolean", "hypergrid"], default="boolean")
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["gk", "btk"], default="gk")
    p.add_argument("--out", default=None)

    p = add("validate", "SCD JSON を検証する")
    p.add_argument("--in", dest="input", required=True)

    p = add("count", "SCD の数を数える")
    _poset_options(p)
    p.add_argument("--method", choices=["oracle", "layered", "both"], default="layered")

    p = add("gadget", "3 レベルのスライスの gadget")
    _poset_options(p)
    p.add_argument("--slice", type=int, required=True, help="X となるレベル i（Y = L_{i+1}, Z = L_{i+2}）")
    p.add_argument("--snmf", action="store_true", help="SNMF の重みを使う")
    p.add_argument("--dump", default=None, help="行列 JSON の出力先")

    p = add("perm", "行列 JSON のパーマネント")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", choices=["rational", "float"], default="rational")

    p = add("bounds", "上下界の評価")
    p.add_argument("--formula", choices=["lemma3", "lemma8", "thm1", "thm2", "trivial", "layered_bregman"],
                   required=True)
    p.add_argument("--params", default=None, help="例: a=4,b=6,r=3 / t=3,n=4,W=1/2:1/3")

    p = add("snmf", "scaled normalized matching flow")
    _poset_options(p)
    p.add_argument("--minimize-max", dest="minimize_max", action="store_true")
    p.add_argument("--pairs", default=None, help="レベル対の範囲 a..b")
    p.add_argument("--out", default=None, help="フロー JSON の出力先")

    p = add("sample", "一様ランダムな SCD")
    _poset_options(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    return ap


# ----------------------------------
# エントリポイント
# ----------------------------------
def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    fmt = args.format or DEFAULT_FORMATS.get(args.command, "json")
    settings = get_settings()
    setup_logging("WARNING" if args.quiet else settings.log_level)
    workers = args.threads if args.threads and args.threads > 0 else settings.workers()

    try:
        payload, table, code = COMMANDS[args.command](args, workers)
    except ScdkitError as e:
        emit_error(e, fmt)
        return e.exit_code
    emit(payload, fmt, table)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
