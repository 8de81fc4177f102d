# scdkit/counting.py
"""
poset 全体の SCD の厳密な数え上げと一様サンプリング。

中央から外側へ 1 層ずつ鎖を伸ばす。層 k の状態 σ は
「張っている鎖の上端（L_{hi+k} の index）→ 下端（L_{lo−k} の index）」の全単射。
層 k → k+1 の拡張は、σ で上下端を同一視した 3 レベル poset P の SCD と 1 対 1 に対応し、
P の SCD（= gadget の完全マッチング）が次の状態 σ' を決める。

- 全階数が偶数: 中央レベルの各要素が長さ 1 の鎖（σ = 恒等写像）から始める
- 全階数が奇数: 中央の 2 レベル間の完全マッチングから始める
"""
from __future__ import annotations

import logging
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

from scdkit.cache import LayerCache, Sigma
from scdkit.config import get_settings
from scdkit.errors import BudgetExceededError, ZeroCountError
from scdkit.gadget import ThreeLevelPoset
from scdkit.permanent import count_perfect_matchings, iter_perfect_matchings
from scdkit.poset_core import GradedPoset, build_poset, level_bigraph
from scdkit.scd_core import Scd, count_scds_bruteforce

logger = logging.getLogger(__name__)


# ----------------------------------
# 層の構造
# ----------------------------------
def middle_levels(poset: GradedPoset) -> tuple[int, int, int]:
    """(中央の下側レベル, 中央の上側レベル, 拡張の回数)"""
    m_total = poset.total_rank
    lo = m_total // 2
    hi = lo if m_total % 2 == 0 else lo + 1
    return lo, hi, lo


def start_states(poset: GradedPoset) -> list[Sigma]:
    lo, hi, _ = middle_levels(poset)
    if lo == hi:
        return [tuple(range(len(poset.levels[lo])))]
    # 上側レベルの index → 下側レベルの index（被覆関係の完全マッチング）
    down = level_bigraph(poset, lo).down
    return list(iter_perfect_matchings(down))


def glued_poset(poset: GradedPoset, layer: int, sigma: Sigma) -> ThreeLevelPoset:
    """
    X = L_{low−1}, Y = σ で同一視した (下端, 上端) の組（上端の index 順）, Z = L_{high+1}。
    x ≺ y ⇔ x ≺ 下端、y ≺ z ⇔ 上端 ≺ z。
    """
    lo, hi, _ = middle_levels(poset)
    low, high = lo - layer, hi + layer
    bottoms, tops = poset.levels[low], poset.levels[high]
    inverse = {b: j for j, b in enumerate(sigma)}
    return ThreeLevelPoset(
        x_labels=poset.levels[low - 1],
        y_labels=tuple((bottoms[sigma[j]], tops[j]) for j in range(len(tops))),
        z_labels=poset.levels[high + 1],
        xy=tuple(
            tuple(inverse[b] for b in poset.up_indices(low - 1, x))
            for x in range(len(poset.levels[low - 1]))
        ),
        yz=tuple(poset.up_indices(high, j) for j in range(len(tops))),
        x_level=low - 1,
        y_levels=(low, high),
        glued=True,
    )


def next_sigma(p3: ThreeLevelPoset, cols: tuple[int, ...]) -> Sigma:
    """マッチング（行 → 列）から次の状態 σ'[z] = x を読み取る"""
    b = p3.b
    x_of = {col: row - b for row, col in enumerate(cols) if row >= b}
    sigma = [-1] * len(p3.z_labels)
    for y in range(b):
        if cols[y] >= b:
            sigma[cols[y] - b] = x_of[y]
    return tuple(sigma)


def _transitions(poset: GradedPoset, layer: int, sigma: Sigma) -> Counter:
    p3 = glued_poset(poset, layer, sigma)
    return Counter(next_sigma(p3, m) for m in iter_perfect_matchings(p3.support_adjacency()))


def _final_count(poset: GradedPoset, layer: int, sigma: Sigma) -> int:
    return count_perfect_matchings(glued_poset(poset, layer, sigma).support_adjacency())


# ----- 並列実行用（worker ごとに poset を 1 回だけ作る） -----
_WORKER_POSET: GradedPoset | None = None


def _init_worker(kind: str, t: int, n: int) -> None:
    global _WORKER_POSET
    _WORKER_POSET = build_poset(kind, t, n)


def _transitions_task(args: tuple[int, Sigma]) -> Counter:
    return _transitions(_WORKER_POSET, *args)


def _final_count_task(args: tuple[int, Sigma]) -> int:
    return _final_count(_WORKER_POSET, *args)


# ----------------------------------
# 層ごとのテーブル
# ----------------------------------
@dataclass
class LayeredTables:
    """completions[k][σ] = 層 k の状態 σ から外側を完成させる方法の数"""
    starts: list[Sigma]
    completions: list[dict[Sigma, int]] = field(default_factory=list)

    @property
    def layers(self) -> int:
        return len(self.completions)

    @property
    def total(self) -> int:
        if not self.completions:
            return len(self.starts)
        return sum(self.completions[0][s] for s in self.starts)

    def state_counts(self) -> list[int]:
        return [len(table) for table in self.completions]


class _Runner:
    """worker 数 1 ならその場で、そうでなければプロセスプールで map する"""

    def __init__(self, poset: GradedPoset, workers: int):
        self.poset = poset
        self.pool = None
        if workers > 1:
            self.pool = ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker,
                initargs=(poset.kind, poset.t, poset.n),
            )

    def map(self, func, task, items: list[tuple[int, Sigma]]) -> list:
        if self.pool is None:
            return [func(self.poset, *item) for item in items]
        # map は入力順に結果を返す
        return list(self.pool.map(task, items, chunksize=max(1, len(items) // 64)))

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()


def compute_layered_tables(poset: GradedPoset, workers: int | None = None,
                           cache: LayerCache | None = None, state_cap: int | None = None,
                           shuffle_seed: int | None = None) -> LayeredTables:
    starts = start_states(poset)
    _, _, s_max = middle_levels(poset)
    if s_max == 0:
        return LayeredTables(starts=starts)

    if cache is not None:
        cached = cache.load(poset)
        if cached is not None and len(cached) == s_max:
            return LayeredTables(starts=starts, completions=cached)

    settings = get_settings()
    cap = state_cap if state_cap is not None else settings.layered_state_cap
    n_workers = workers if workers is not None else settings.workers()
    shuffler = random.Random(shuffle_seed) if shuffle_seed is not None else None

    def ordered(states) -> list[Sigma]:
        items = sorted(states)
        if shuffler is not None:
            shuffler.shuffle(items)
        return items

    runner = _Runner(poset, n_workers)
    try:
        # 前進: 到達可能な状態と遷移の重複度
        layer_states: list[list[Sigma]] = [ordered(set(starts))]
        moves: list[dict[Sigma, Counter]] = []
        for k in range(s_max - 1):
            states = layer_states[k]
            results = runner.map(_transitions, _transitions_task, [(k, s) for s in states])
            moves.append(dict(zip(states, results)))
            reached = set()
            for counter in results:
                reached.update(counter)
            if len(reached) > cap:
                raise BudgetExceededError(
                    f"層 {k + 1} の状態数 {len(reached)} が上限 {cap} を超えています",
                    layer=k + 1, states=len(reached), cap=cap,
                )
            logger.info(f"層 {k + 1}/{s_max}: 状態数={len(reached)}")
            layer_states.append(ordered(reached))

        # 後退: 最外層はマッチング数、その内側は重複度つきの和
        completions: list[dict[Sigma, int]] = [dict() for _ in range(s_max)]
        last = s_max - 1
        counts = runner.map(_final_count, _final_count_task, [(last, s) for s in layer_states[last]])
        completions[last] = dict(zip(layer_states[last], counts))
        for k in range(s_max - 2, -1, -1):
            nxt = completions[k + 1]
            completions[k] = {
                s: sum(mult * nxt[s2] for s2, mult in moves[k][s].items()) for s in layer_states[k]
            }
    finally:
        runner.close()

    tables = LayeredTables(
        starts=starts, completions=[dict(sorted(table.items())) for table in completions]
    )
    if cache is not None:
        cache.save(poset, tables.completions)
    return tables


# ----------------------------------
# 公開 API
# ----------------------------------
def count_scd_oracle(poset: GradedPoset, max_elements: int | None = None) -> int:
    limit = max_elements if max_elements is not None else get_settings().oracle_max_elements
    if poset.size > limit:
        raise BudgetExceededError(
            f"総当たりは要素数 {limit} までです（{poset.size}）", size=poset.size, limit=limit
        )
    return count_scds_bruteforce(poset)


def count_scd_layered(poset: GradedPoset, workers: int | None = None,
                      cache: LayerCache | None = None, state_cap: int | None = None,
                      shuffle_seed: int | None = None) -> int:
    tables = compute_layered_tables(poset, workers, cache, state_cap, shuffle_seed)
    logger.info(f"層別計数: {poset.kind} t={poset.t} n={poset.n} 状態数={tables.state_counts()}")
    return tables.total


def count_scd_threelevel(p3: ThreeLevelPoset, max_size: int | None = None) -> int:
    return count_perfect_matchings(p3.support_adjacency(), max_size)


def iter_glued_posets(poset: GradedPoset,
                      tables: LayeredTables | None = None) -> Iterator[tuple[int, Sigma, ThreeLevelPoset]]:
    """到達可能な全ての (層, σ, P) を層の順・σ の順に返す"""
    tables = tables or compute_layered_tables(poset, workers=1)
    for k, table in enumerate(tables.completions):
        for sigma in table:
            yield k, sigma, glued_poset(poset, k, sigma)


def _choose(rng: random.Random, weighted: Iterator[tuple[object, int]], total: int):
    """重み付きの候補列から total に対する比率で 1 つ選ぶ"""
    u = rng.randrange(total)
    acc = 0
    for item, w in weighted:
        acc += w
        if u < acc:
            return item
    raise ZeroCountError("重みの合計が完成数と一致しません", total=total)


def sample_scd_uniform(poset: GradedPoset, seed: int | None = None,
                       tables: LayeredTables | None = None,
                       rng: random.Random | None = None) -> Scd:
    """各層で「完成数に比例する確率」で拡張を選ぶ（全 SCD 上の厳密な一様分布）"""
    rng = rng or random.Random(seed)
    tables = tables or compute_layered_tables(poset, workers=1)
    total = tables.total
    if total == 0:
        raise ZeroCountError("この poset には SCD がありません", kind=poset.kind, t=poset.t, n=poset.n)
    lo, hi, s_max = middle_levels(poset)

    def start_weight(s: Sigma) -> int:
        return tables.completions[0][s] if s_max else 1

    sigma = _choose(rng, ((s, start_weight(s)) for s in tables.starts), total)

    # 上端 index → 鎖（(レベル, index) の列）
    if lo == hi:
        open_chains = {j: [(lo, j)] for j in range(len(poset.levels[lo]))}
    else:
        open_chains = {j: [(lo, sigma[j]), (hi, j)] for j in range(len(poset.levels[hi]))}
    closed: list[list[tuple[int, int]]] = []

    for k in range(s_max):
        p3 = glued_poset(poset, k, sigma)
        outer = tables.completions[k + 1] if k + 1 < s_max else None

        def candidates():
            for m in iter_perfect_matchings(p3.support_adjacency()):
                s2 = next_sigma(p3, m)
                yield (m, s2), (outer[s2] if outer is not None else 1)

        m, new_sigma = _choose(rng, candidates(), tables.completions[k][sigma])
        low, high = lo - k, hi + k
        b = p3.b
        x_of = {col: row - b for row, col in enumerate(m) if row >= b}
        nxt: dict[int, list[tuple[int, int]]] = {}
        for y in range(b):
            chain = open_chains[y]
            if m[y] == y:
                closed.append(chain)
            else:
                z = m[y] - b
                nxt[z] = [(low - 1, x_of[y])] + chain + [(high + 1, z)]
        open_chains = nxt
        sigma = new_sigma

    closed.extend(open_chains.values())
    return Scd.from_chains(
        [[poset.levels[lv][i] for lv, i in chain] for chain in closed], poset.total_rank
    )
