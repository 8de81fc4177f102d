# scdkit/bounds.py
"""
有限パラメータでの上下界（全て自然対数）。階乗は lgamma で評価する。
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence, Union

import pandas as pd

from scdkit.config import get_settings
from scdkit.errors import InvalidParameterError
from scdkit.poset_core import level_sizes, up_degree_histogram

logger = logging.getLogger(__name__)

Real = Union[int, float, Fraction]

THEOREM1_MAX_N = 10**4
ABSOLUTE_LOG_MAX_N = 1000

TABLE_COLUMNS = [
    "formula", "params", "log_lower", "log_upper", "normalized",
    "exact_log_count_if_available", "inside_sandwich",
]


@dataclass(frozen=True)
class LogBound:
    formula: str
    params: dict[str, Any]
    log_lower: float | None = None
    log_upper: float | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def contains(self, log_value: float, slack: float | None = None) -> bool:
        tol = slack if slack is not None else get_settings().float_tolerance
        if self.log_lower is not None and log_value < self.log_lower - tol:
            return False
        if self.log_upper is not None and log_value > self.log_upper + tol:
            return False
        return True


def _check_sizes(a: int, b: int) -> None:
    if a < 1 or b <= a:
        raise InvalidParameterError(f"1 <= a < b が必要です（a={a}, b={b}）", a=a, b=b)


# ----------------------------------
# 3 レベル poset
# ----------------------------------
def lemma3_bounds(a: int, b: int, r: int) -> LogBound:
    """
    lower = 2a(ln r − 1) − 2(b − a)
    upper = ((a+b)/r)·ln r!
    extras: proof_lower = 2a ln r − (a+b)（証明中のより強い形）、
            falikman_lower（k!/k^k をそのまま使った形）、
            bregman_form = (a/r) ln r! + (b/q) ln q!, q = ar/b + 1
    """
    _check_sizes(a, b)
    if r < 1:
        raise InvalidParameterError(f"r >= 1 が必要です（r={r}）", r=r)
    k = a + b
    lower = 2 * a * (math.log(r) - 1) - 2 * (b - a)
    upper = (k / r) * math.lgamma(r + 1)
    q = a * r / b + 1
    extras = {
        "proof_lower": 2 * a * math.log(r) - k,
        "falikman_lower": math.lgamma(k + 1) - k * math.log(k) + 2 * a * math.log(r)
        - (b - a) * math.log1p(-a / b),
        "bregman_form": (a / r) * math.lgamma(r + 1) + (b / q) * math.lgamma(q + 1),
        "q": q,
    }
    return LogBound("lemma3", {"a": a, "b": b, "r": r}, lower, upper, extras)


def lemma8_lower(a: int, b: int, w: Real) -> LogBound:
    """W^{−2a}·e^{−(a+b)}"""
    _check_sizes(a, b)
    if not 0 < w <= 1:
        raise InvalidParameterError(f"0 < W <= 1 が必要です（W={w}）", W=str(w))
    lower = -2 * a * math.log(w) - (a + b)
    return LogBound("lemma8", {"a": a, "b": b, "W": float(w)}, lower, None)


# ----------------------------------
# ブール束全体
# ----------------------------------
def _binomials(n: int) -> list[int]:
    row = [1]
    for k in range(n):
        row.append(row[-1] * (n - k) // (k + 1))
    return row


def _fact_ratio(k: int) -> float:
    """ln k! − k ln k。k が大きければ Stirling の下側評価 −k（≤ 真値）を使う"""
    if k < 10**15:
        return math.lgamma(k + 1) - k * math.log(k)
    return -float(k)


def theorem1_bounds(n: int) -> LogBound:
    """
    中央から外側へ s = 1..m の層ごとに 3 レベルの評価を掛け合わせる。
    層 s: a = |L_{m+s}|, b = |L_{m+s−1}|, r = m + s（奇数 n は中央 2 レベルのマッチング数を先に掛ける）。
    absolute な対数は n <= 1000 のときだけ返し、正規化した値は常に返す。
    """
    if not isinstance(n, int) or not 1 <= n <= THEOREM1_MAX_N:
        raise InvalidParameterError(f"1 <= n <= {THEOREM1_MAX_N} が必要です（n={n}）", n=n)
    sizes = _binomials(n)
    total = 1 << n
    lo = n // 2
    hi = lo if n % 2 == 0 else lo + 1

    # 2^n で割った値で足し合わせる（巨大な整数を float に直さない）
    norm_lower = 0.0
    norm_upper = 0.0
    if lo != hi:
        k, r = sizes[lo], hi
        rho = k / total
        norm_lower += rho * math.log(r) + _fact_ratio(k) / total
        norm_upper += rho * math.lgamma(r + 1) / r
    for s in range(1, lo + 1):
        a, b, r = sizes[lo - s], sizes[lo - s + 1], hi + s
        ra, rb = a / total, b / total
        norm_lower += 2 * ra * (math.log(r) - 1) - 2 * (rb - ra)
        norm_upper += ((ra + rb) / r) * math.lgamma(r + 1)

    middle_ratio = sizes[hi] / total
    extras = {
        "normalized": norm_lower,
        "normalized_upper": norm_upper,
        "normalized_effective": norm_lower / (1 - middle_ratio),
        "headline": math.log(n / (2 * math.e)),
    }
    lower = upper = None
    if n <= ABSOLUTE_LOG_MAX_N:
        lower, upper = norm_lower * total, norm_upper * total
    return LogBound("thm1", {"n": n}, lower, upper, extras)


def theorem1_layer_bounds(n: int) -> list[LogBound]:
    """theorem1_bounds の各層の項（lemma3_bounds の形）"""
    sizes = _binomials(n)
    lo = n // 2
    hi = lo if n % 2 == 0 else lo + 1
    return [lemma3_bounds(sizes[lo - s], sizes[lo - s + 1], hi + s) for s in range(1, lo + 1)]


# ----------------------------------
# ハイパーグリッド
# ----------------------------------
def layer_cap(t: int, n: int) -> int:
    """下界に使う層の数 min(floor(t·n^{3/5}), 拡張回数)"""
    m_total = n * (t - 1)
    return min(int(math.floor(t * n ** 0.6)), m_total // 2)


def theorem2_lower(t: int, n: int, w_per_layer: Sequence[Real],
                   w_middle: Real | None = None) -> LogBound:
    """
    Σ_s [−2|L_{lo−s}| ln W_s − (|L_{lo−s}| + |L_{hi+s−1}|)]。
    全階数が奇数なら中央のマッチングの項 −k ln W_mid − k を加える（w_middle が無ければ省略）。
    使わない層の因子は 1 以上なので省略しても下界のまま。
    """
    if t < 2 or n < 1:
        raise InvalidParameterError(f"t >= 2, n >= 1 が必要です（t={t}, n={n}）", t=t, n=n)
    for w in list(w_per_layer) + ([w_middle] if w_middle is not None else []):
        if not 0 < w <= 1:
            raise InvalidParameterError(f"W は (0, 1] の範囲である必要があります（W={w}）", W=str(w))
    sizes = level_sizes(t, n)
    m_total = len(sizes) - 1
    lo = m_total // 2
    hi = lo if m_total % 2 == 0 else lo + 1
    layers = min(layer_cap(t, n), len(w_per_layer))
    if layers < layer_cap(t, n):
        logger.warning(f"W が {len(w_per_layer)} 層分しかありません（必要 {layer_cap(t, n)} 層）")

    total = t**n
    norm = 0.0
    if lo != hi and w_middle is not None:
        k = sizes[lo] / total
        norm += -k * math.log(w_middle) - k
    for s in range(1, layers + 1):
        a, b = sizes[lo - s] / total, sizes[hi + s - 1] / total
        norm += -2 * a * math.log(w_per_layer[s - 1]) - (a + b)

    lower = norm * total if total < 1e300 else None
    extras = {"normalized": norm, "layers": layers, "headline": math.log(n) if n > 1 else 0.0}
    params = {"t": t, "n": n, "W": [float(w) for w in w_per_layer[:layers]]}
    if w_middle is not None:
        params["W_middle"] = float(w_middle)
    return LogBound("thm2", params, lower, None, extras)


def trivial_upper(t: int, n: int) -> LogBound:
    """ln n^{t^n} = t^n ln n"""
    if t < 2 or n < 1:
        raise InvalidParameterError(f"t >= 2, n >= 1 が必要です（t={t}, n={n}）", t=t, n=n)
    try:
        upper = float(t**n) * math.log(n)
    except OverflowError:
        upper = math.inf
    return LogBound("trivial", {"t": t, "n": n}, None, upper, {"normalized": math.log(n)})


def layered_bregman_upper(t: int, n: int) -> LogBound:
    """
    層ごとの gadget の行次数に Brégman を適用した上界の和。
    行次数の多重集合は σ に依らず、up-degree の分布だけで決まる。
    Y_1 の行: 上端の up-degree（a < b なら copy 辺で +1）、X の行: X の up-degree。
    """
    hist = up_degree_histogram(t, n)
    sizes = [sum(h.values()) for h in hist]
    m_total = len(hist) - 1
    lo = m_total // 2
    hi = lo if m_total % 2 == 0 else lo + 1

    def bregman(h: dict[int, int], extra: int = 0) -> float:
        return sum(c * math.lgamma(d + extra + 1) / (d + extra) for d, c in h.items())

    upper = 0.0
    if lo != hi:
        upper += bregman(hist[lo])
    for s in range(1, lo + 1):
        low, high = lo - s + 1, hi + s - 1
        copy = 1 if sizes[low - 1] < sizes[high] else 0
        upper += bregman(hist[high], copy) + bregman(hist[low - 1])
    return LogBound("layered_bregman", {"t": t, "n": n}, None, upper)


# ----------------------------------
# 証明書・表
# ----------------------------------
def certify(log_count: float, bound: LogBound, slack: float | None = None) -> bool:
    inside = bound.contains(log_count, slack)
    if not inside:
        logger.warning(
            f"{bound.formula} の範囲外です: ln count={log_count:.6f} "
            f"lower={bound.log_lower} upper={bound.log_upper}"
        )
    return inside


def _format_params(params: dict[str, Any]) -> str:
    return ";".join(f"{k}={v}" for k, v in params.items())


def bounds_table(rows: Sequence[tuple[LogBound, float | None]]) -> pd.DataFrame:
    """(LogBound, 厳密な ln count または None) の列 → CSV 用の表"""
    records = []
    for bound, log_count in rows:
        records.append({
            "formula": bound.formula,
            "params": _format_params(bound.params),
            "log_lower": bound.log_lower,
            "log_upper": bound.log_upper,
            "normalized": bound.extras.get("normalized"),
            "exact_log_count_if_available": log_count,
            "inside_sandwich": None if log_count is None else bound.contains(log_count),
        })
    return pd.DataFrame.from_records(records, columns=TABLE_COLUMNS)
