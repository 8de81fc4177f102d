# scdkit/scd_core.py
"""
鎖（chain）と対称鎖分解（SCD）の表現・検証・総当たり列挙。

poset は GradedPoset と gadget.ThreeLevelPoset のどちらでもよい（RankedPoset プロトコル）。
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterator, Protocol, Sequence

from scdkit.errors import ForeignElementError, SchemaError
from scdkit.poset_core import GradedPoset, poset_from_json_dict

logger = logging.getLogger(__name__)

Chain = tuple


class RankedPoset(Protocol):
    levels: Sequence[Sequence[Hashable]]

    @property
    def total_rank(self) -> int: ...

    @property
    def size(self) -> int: ...

    def __contains__(self, e: object) -> bool: ...

    def rank(self, e: Hashable) -> int: ...

    def covers(self, x: Hashable, y: Hashable) -> bool: ...

    def up_indices(self, level: int, i: int) -> tuple[int, ...]: ...


# ----------------------------------
# 型
# ----------------------------------
@dataclass(frozen=True)
class Scd:
    """鎖は下から上へ格納。chains は最小元の canonical order で整列済み"""
    chains: tuple[Chain, ...]
    total_rank: int

    @classmethod
    def from_chains(cls, chains: Sequence[Sequence[Hashable]], total_rank: int) -> "Scd":
        # 空の鎖は先頭へ（validate_scd が empty_chain として報告する）
        ordered = sorted((tuple(c) for c in chains), key=lambda c: (bool(c), c[0] if c else 0))
        return cls(chains=tuple(ordered), total_rank=total_rank)

    def __len__(self) -> int:
        return len(self.chains)


@dataclass(frozen=True)
class Violation:
    chain_index: int | None
    condition: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, chain_index: int | None, condition: str, message: str) -> None:
        self.violations.append(Violation(chain_index, condition, message))

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": [
                {"chain": v.chain_index, "condition": v.condition, "message": v.message}
                for v in self.violations
            ],
        }


# ----------------------------------
# 検証
# ----------------------------------
def validate_scd(poset: RankedPoset, scd: Scd) -> ValidationReport:
    """分割・対称性・被覆ステップを全て検査し、違反をまとめて返す（fail-fast しない）"""
    for chain in scd.chains:
        for e in chain:
            if e not in poset:
                raise ForeignElementError(f"poset に含まれない要素です: {e!r}", element=repr(e))

    report = ValidationReport()
    m_total = poset.total_rank
    seen: dict[Hashable, int] = {}

    for ci, chain in enumerate(scd.chains):
        if not chain:
            report.add(ci, "empty_chain", "空の鎖があります")
            continue
        for k in range(len(chain) - 1):
            if not poset.covers(chain[k], chain[k + 1]):
                report.add(ci, "not_cover_step",
                           f"{chain[k]!r} → {chain[k + 1]!r} が被覆関係ではありません")
        lo, hi = poset.rank(chain[0]), poset.rank(chain[-1])
        if lo + hi != m_total:
            report.add(ci, "not_symmetric", f"r(x_0)+r(x_k)={lo + hi} ≠ {m_total}")
        for e in chain:
            if e in seen:
                report.add(ci, "not_disjoint", f"{e!r} は鎖 {seen[e]} にも含まれています")
            else:
                seen[e] = ci

    if len(seen) != poset.size:
        report.add(None, "not_covering", f"{poset.size - len(seen)} 個の要素がどの鎖にも含まれていません")
    middle = max(len(level) for level in poset.levels)
    if len(scd.chains) != middle:
        report.add(None, "chain_count", f"鎖の数 {len(scd.chains)} ≠ 最大レベルの大きさ {middle}")
    return report


def chain_profile(scd: Scd) -> dict[int, int]:
    """鎖の長さ → 本数（長い順）"""
    counts = Counter(len(c) for c in scd.chains)
    return dict(sorted(counts.items(), reverse=True))


def expected_profile(sizes: Sequence[int]) -> dict[int, int]:
    """レベルの大きさだけから決まる profile。rank i から始まる鎖は |L_i|-|L_{i-1}| 本"""
    m_total = len(sizes) - 1
    profile: dict[int, int] = {}
    for i in range(m_total // 2 + 1):
        starting = sizes[i] - (sizes[i - 1] if i > 0 else 0)
        if starting:
            profile[m_total - 2 * i + 1] = starting
    return profile


# ----------------------------------
# 総当たり列挙（レベル順のバックトラック）
# ----------------------------------
def _extensions(up_sets: list[set[int]], size: int, allow_new: bool) -> Iterator[tuple[int, ...]]:
    """
    1 レベル分の割り当てを列挙。owner[i] は延長する保留中の鎖の番号、-1 は新しい鎖。
    保留中の鎖は全てちょうど 1 回延長されなければならない。
    """
    k = len(up_sets)
    owner = [-1] * size
    used = [False] * k

    def rec(i: int, remaining: int) -> Iterator[tuple[int, ...]]:
        if size - i < remaining:
            return
        if i == size:
            yield tuple(owner)
            return
        for p in range(k):
            if not used[p] and i in up_sets[p]:
                used[p] = True
                owner[i] = p
                yield from rec(i + 1, remaining - 1)
                used[p] = False
        if allow_new:
            owner[i] = -1
            yield from rec(i + 1, remaining)

    yield from rec(0, k)


def enumerate_scds(poset: RankedPoset) -> Iterator[Scd]:
    """全ての SCD を列挙する。各 SCD はちょうど 1 回現れる（小さな poset 専用）"""
    levels = poset.levels
    m_total = len(levels) - 1

    def rec(level: int, chains: list[list[tuple[int, int]]], ends: list[int],
            pending: list[int]) -> Iterator[list[list[tuple[int, int]]]]:
        if level > m_total:
            yield chains
            return
        up_sets = [set(poset.up_indices(level - 1, chains[c][-1][1])) for c in pending]
        allow_new = level <= m_total - level
        for owner in _extensions(up_sets, len(levels[level]), allow_new):
            new_chains = [list(c) for c in chains]
            new_ends = list(ends)
            for i, o in enumerate(owner):
                if o < 0:
                    new_chains.append([(level, i)])
                    new_ends.append(m_total - level)
                else:
                    new_chains[pending[o]].append((level, i))
            nxt = [c for c, ch in enumerate(new_chains) if ch[-1][0] == level and new_ends[c] > level]
            yield from rec(level + 1, new_chains, new_ends, nxt)

    for chains in rec(0, [], [], []):
        yield Scd.from_chains(
            [[levels[lv][i] for lv, i in chain] for chain in chains], m_total
        )


def count_scds_bruteforce(poset: RankedPoset) -> int:
    """レベル境界の状態（保留鎖の上端と終端レベル）でメモ化した総当たり計数"""
    levels = poset.levels
    m_total = len(levels) - 1
    memo: dict[tuple, int] = {}

    def rec(level: int, pending: tuple[tuple[int, int], ...]) -> int:
        if level > m_total:
            return 1
        key = (level, pending)
        if key in memo:
            return memo[key]
        up_sets = [set(poset.up_indices(level - 1, top)) for top, _ in pending]
        allow_new = level <= m_total - level
        total = 0
        for owner in _extensions(up_sets, len(levels[level]), allow_new):
            nxt = []
            for i, o in enumerate(owner):
                end = pending[o][1] if o >= 0 else m_total - level
                if end > level:
                    nxt.append((i, end))
            total += rec(level + 1, tuple(sorted(nxt)))
        memo[key] = total
        return total

    count = rec(0, ())
    logger.debug(f"総当たり計数: 状態数={len(memo)} count={count}")
    return count


# ----------------------------------
# JSON
# ----------------------------------
def dumps_canonical(doc: Any) -> str:
    """同じ入力に対してバイト単位で同一の JSON を返す"""
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


def scd_to_json_dict(poset: GradedPoset, scd: Scd) -> dict[str, Any]:
    return {
        "poset": poset.to_json_dict(),
        "chains": [[poset.encode(e) for e in chain] for chain in scd.chains],
    }


def scd_from_json_dict(doc: dict[str, Any]) -> tuple[GradedPoset, Scd]:
    if not isinstance(doc, dict) or "poset" not in doc or "chains" not in doc:
        raise SchemaError("SCD JSON には poset と chains が必要です")
    poset = poset_from_json_dict(doc["poset"])
    try:
        chains = [[poset.decode(v) for v in chain] for chain in doc["chains"]]
    except (TypeError, ValueError) as e:
        raise SchemaError(f"chains の形式が不正です: {e}")
    return poset, Scd.from_chains(chains, poset.total_rank)
