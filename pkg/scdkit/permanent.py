# scdkit/permanent.py
"""
パーマネントと完全マッチング数。

- permanent_ryser         : Gray code 順の包除原理（有理数は共通分母で整数化して厳密に計算）
- permanent_naive         : 置換の総和（9×9 まで、第三の検算用）
- count_perfect_matchings : 列集合の部分集合 DP（Ryser とコードを共有しない独立な検算）
- bregman_upper           : Brégman 上界 Σ ln(d_i!)/d_i
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Any, Iterator, Sequence, Union

import networkx as nx
import numpy as np

from scdkit.config import get_settings
from scdkit.errors import BudgetExceededError, InvalidParameterError

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float]
Matrix = Sequence[Sequence[Number]]
Adjacency = Sequence[Sequence[int]]

NAIVE_MAX_SIZE = 9
MIN_CHUNK_BITS = 14


@dataclass(frozen=True)
class MatchingCount:
    value: Union[int, Fraction, float]
    exact: bool
    method: str

    def __post_init__(self):
        if self.value < 0:
            raise InvalidParameterError(f"マッチング数が負です: {self.value}")


# ----------------------------------
# 入力検査
# ----------------------------------
def _entries(matrix: Any) -> list[list[Number]]:
    rows = getattr(matrix, "entries", matrix)
    rows = [list(row) for row in rows]
    k = len(rows)
    if any(len(row) != k for row in rows):
        raise InvalidParameterError("正方行列ではありません", size=k)
    if any(v < 0 for row in rows for v in row):
        raise InvalidParameterError("負の成分があります")
    return rows


def _check_size(k: int, max_size: int | None) -> None:
    limit = max_size if max_size is not None else get_settings().permanent_max_size
    if k > limit:
        raise BudgetExceededError(f"行列サイズ {k} が上限 {limit} を超えています", size=k, limit=limit)


# ----------------------------------
# Ryser（Gray code）
# ----------------------------------
def _ryser_chunk(rows: list[list[int]], start: int, stop: int) -> int:
    """
    Gray code の index start..stop-1（0 は空集合なので除く）の符号付き寄与の和。
    寄与 = (−1)^{|S|} ∏_i Σ_{j∈S} a_ij
    """
    k = len(rows)
    gray = start ^ (start >> 1)
    sums = [sum(row[j] for j in range(k) if gray >> j & 1) for row in rows]
    total = 0
    for g_index in range(start, stop):
        if g_index != start:
            changed = (g_index & -g_index).bit_length() - 1
            new_gray = g_index ^ (g_index >> 1)
            if new_gray >> changed & 1:
                for i in range(k):
                    sums[i] += rows[i][changed]
            else:
                for i in range(k):
                    sums[i] -= rows[i][changed]
            gray = new_gray
        prod = 1
        for s in sums:
            if not s:
                prod = 0
                break
            prod *= s
        if prod:
            total += -prod if gray.bit_count() & 1 else prod
    return total


def _chunks(k: int, parts: int) -> list[tuple[int, int]]:
    end = 1 << k
    if parts <= 1 or k < MIN_CHUNK_BITS:
        return [(1, end)]
    step = -(-(end - 1) // parts)
    return [(lo, min(lo + step, end)) for lo in range(1, end, step)]


def _ryser_integer(rows: list[list[int]], workers: int) -> int:
    k = len(rows)
    chunks = _chunks(k, workers)
    if len(chunks) == 1:
        total = _ryser_chunk(rows, *chunks[0])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_ryser_chunk, rows, lo, hi) for lo, hi in chunks]
            # チャンク順に加算（整数なので結果は worker 数に依らない）
            total = sum(f.result() for f in futures)
    return -total if k & 1 else total


def _ryser_float(rows: list[list[float]]) -> float:
    a = np.asarray(rows, dtype=np.float64)
    k = a.shape[0]
    sums = np.zeros(k, dtype=np.float64)
    total = 0.0
    gray = 0
    for g_index in range(1, 1 << k):
        changed = (g_index & -g_index).bit_length() - 1
        new_gray = g_index ^ (g_index >> 1)
        if new_gray >> changed & 1:
            sums += a[:, changed]
        else:
            sums -= a[:, changed]
        gray = new_gray
        prod = float(np.prod(sums))
        total += -prod if gray.bit_count() & 1 else prod
    return -total if k & 1 else total


def permanent_ryser(matrix: Any, arithmetic: str = "rational", workers: int | None = None,
                    max_size: int | None = None) -> MatchingCount:
    """
    rational: 共通分母 D で整数行列 B = D·A にし、perm(A) = perm(B)/D^k を厳密に返す。
    float   : numpy の float64。誤差は 2^k 項の打ち消しで増える（小さい k の概算用）。
    """
    rows = _entries(matrix)
    k = len(rows)
    _check_size(k, max_size)
    if k == 0:
        return MatchingCount(1, exact=True, method="ryser")

    if arithmetic == "float":
        value = _ryser_float([[float(v) for v in row] for row in rows])
        return MatchingCount(max(value, 0.0), exact=False, method="ryser_float")
    if arithmetic != "rational":
        raise InvalidParameterError(f"未知の演算モードです: {arithmetic}", arithmetic=arithmetic)
    if any(isinstance(v, float) for row in rows for v in row):
        rows = [[Fraction(v) for v in row] for row in rows]

    denom = 1
    for row in rows:
        for v in row:
            denom = math.lcm(denom, Fraction(v).denominator)
    scaled = [[int(Fraction(v) * denom) for v in row] for row in rows]
    n_workers = workers if workers is not None else get_settings().workers()
    total = _ryser_integer(scaled, n_workers)
    logger.debug(f"Ryser: k={k} D={denom} workers={n_workers}")
    if denom == 1:
        return MatchingCount(total, exact=True, method="ryser")
    return MatchingCount(Fraction(total, denom**k), exact=True, method="ryser")


def permanent_naive(matrix: Any) -> MatchingCount:
    rows = _entries(matrix)
    k = len(rows)
    if k > NAIVE_MAX_SIZE:
        raise BudgetExceededError(
            f"置換展開は {NAIVE_MAX_SIZE}×{NAIVE_MAX_SIZE} までです（{k}）", size=k, limit=NAIVE_MAX_SIZE
        )
    total: Number = 0
    for perm in permutations(range(k)):
        prod: Number = 1
        for i, j in enumerate(perm):
            prod *= rows[i][j]
            if not prod:
                break
        total += prod
    exact = not any(isinstance(v, float) for row in rows for v in row)
    return MatchingCount(total, exact=exact, method="naive")


# ----------------------------------
# 完全マッチング
# ----------------------------------
def adjacency_from_matrix(matrix: Any) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(j for j, v in enumerate(row) if v) for row in _entries(matrix))


def _check_adjacency(adj: Adjacency, max_size: int | None) -> int:
    k = len(adj)
    _check_size(k, max_size)
    for cols in adj:
        if any(not 0 <= j < k for j in cols):
            raise InvalidParameterError(f"列 index が範囲外です: {list(cols)}", size=k)
    return k


def count_perfect_matchings(adj: Adjacency, max_size: int | None = None) -> int:
    """行を順に処理し、使用済み列集合 → 数 の辞書を前進させる"""
    k = _check_adjacency(adj, max_size)
    frontier: dict[int, int] = {0: 1}
    for cols in adj:
        nxt: dict[int, int] = {}
        for used, c in frontier.items():
            for j in cols:
                bit = 1 << j
                if not used & bit:
                    nxt[used | bit] = nxt.get(used | bit, 0) + c
        frontier = nxt
        if not frontier:
            return 0
    return frontier.get((1 << k) - 1, 0)


def iter_perfect_matchings(adj: Adjacency) -> Iterator[tuple[int, ...]]:
    """行の昇順・列の昇順のバックトラック。各マッチングは行ごとの列のタプル"""
    k = len(adj)
    chosen = [-1] * k
    used = [False] * k

    def rec(i: int) -> Iterator[tuple[int, ...]]:
        if i == k:
            yield tuple(chosen)
            return
        for j in sorted(adj[i]):
            if not used[j]:
                used[j] = True
                chosen[i] = j
                yield from rec(i + 1)
                used[j] = False

    yield from rec(0)


def find_perfect_matching(adj: Adjacency) -> tuple[int, ...] | None:
    """Hopcroft–Karp で完全マッチングを 1 つ探す。存在しなければ None"""
    k = len(adj)
    g = nx.Graph()
    rows = [("r", i) for i in range(k)]
    g.add_nodes_from(rows, bipartite=0)
    g.add_nodes_from((("c", j) for j in range(k)), bipartite=1)
    g.add_edges_from((("r", i), ("c", j)) for i, cols in enumerate(adj) for j in cols)
    matching = nx.bipartite.hopcroft_karp_matching(g, top_nodes=rows)
    if sum(1 for node in matching if node[0] == "r") != k:
        return None
    return tuple(matching[("r", i)][1] for i in range(k))


# ----------------------------------
# 上界・証明書
# ----------------------------------
def bregman_upper(degrees: Sequence[int]) -> float:
    """ln ∏ (d_i!)^{1/d_i}"""
    total = 0.0
    for i, d in enumerate(degrees):
        if d < 1:
            raise InvalidParameterError(
                f"次数 0 の頂点があります（index {i}）。完全マッチングは存在しません", index=i
            )
        total += math.lgamma(d + 1) / d
    return total


@dataclass(frozen=True)
class Certificate:
    name: str
    value: Any
    bound: Any
    passed: bool

    def to_json_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value": str(self.value), "bound": str(self.bound), "passed": self.passed}


def falikman_certificate(matrix: Any, perm: MatchingCount | None = None) -> Certificate:
    """二重確率行列 A について perm(A) ≥ k!/k^k を厳密な有理数で比較する"""
    rows = _entries(matrix)
    k = len(rows)
    value = perm if perm is not None else permanent_ryser(rows)
    bound = Fraction(math.factorial(k), k**k) if k else Fraction(1)
    passed = Fraction(value.value) >= bound
    if not passed:
        logger.warning(f"Falikman 下界を満たしません: k={k} perm={value.value}")
    return Certificate("falikman", value.value, bound, passed)


def bregman_certificate(adj: Adjacency, count: int | None = None,
                        tolerance: float | None = None) -> Certificate:
    """完全マッチング数 ≤ exp(bregman_upper(行の次数列))（相対誤差 tolerance まで許容）"""
    tol = tolerance if tolerance is not None else get_settings().float_tolerance
    value = count if count is not None else count_perfect_matchings(adj)
    log_bound = bregman_upper([len(cols) for cols in adj])
    passed = value == 0 or math.log(value) <= log_bound + math.log1p(tol)
    if not passed:
        logger.warning(f"Brégman 上界を超えています: count={value} bound=exp({log_bound:.6f})")
    return Certificate("bregman", value, math.exp(log_bound) if log_bound < 700 else f"exp({log_bound})", passed)
