# scdkit/scd_construct.py
"""
参照用 SCD の構成。

- gk_decomposition  : 括弧対応による 2^[n] の SCD
- btk_decomposition : [t]^n の再帰構成（k×t グリッドの剥ぎ取り）
"""
from __future__ import annotations

import logging

from scdkit.poset_core import check_budget, check_parameters
from scdkit.scd_core import Scd

logger = logging.getLogger(__name__)


# ----------------------------------
# 括弧対応（ブール束）
# ----------------------------------
def _bracket_scan(mask: int, n: int) -> tuple[int, list[int]]:
    """
    位置 n..1 を左から右へ読む（マスクの 2 進表記と同じ並び）。
    S に含まれる位置は ')'、含まれない位置は '('。
    戻り値: (対応しない ')' の数, 対応しない '(' の位置リスト（左から右）)
    """
    stack: list[int] = []
    unmatched_close = 0
    for p in range(n, 0, -1):
        if mask >> (p - 1) & 1:
            if stack:
                stack.pop()
            else:
                unmatched_close += 1
        else:
            stack.append(p)
    return unmatched_close, stack


def gk_decomposition(n: int, budget: int | None = None) -> Scd:
    check_parameters("boolean", 2, n)
    check_budget(2, n, budget)

    chains = []
    for mask in range(1 << n):
        unmatched_close, opens = _bracket_scan(mask, n)
        if unmatched_close:
            continue
        # 対応しない ')' を持たない集合が鎖の最小元。'(' を左から順に ')' へ反転
        chain = [mask]
        cur = mask
        for p in opens:
            cur |= 1 << (p - 1)
            chain.append(cur)
        chains.append(chain)

    logger.debug(f"GK 構成: n={n} 鎖数={len(chains)}")
    return Scd.from_chains(chains, n)


# ----------------------------------
# グリッド剥ぎ取り（ハイパーグリッド）
# ----------------------------------
def _peel(chain: tuple[tuple[int, ...], ...], t: int) -> list[list[tuple[int, ...]]]:
    """
    鎖 c_1 ≺ … ≺ c_k と新しい座標 1..t の積（k×t グリッド）を min(k,t) 本の対称鎖に分ける。
    j 本目: (c_{j+1}, 1..t−j) の後に (c_{j+2..k}, t−j)。最長の鎖が (c_1, 1) の角を取る。
    """
    k = len(chain)
    out = []
    for j in range(min(k, t)):
        peeled = [chain[j] + (v,) for v in range(1, t - j + 1)]
        peeled += [chain[i] + (t - j,) for i in range(j + 1, k)]
        out.append(peeled)
    return out


def btk_decomposition(t: int, n: int, budget: int | None = None) -> Scd:
    check_parameters("hypergrid", t, n)
    check_budget(t, n, budget)

    chains: list[tuple[tuple[int, ...], ...]] = [tuple((v,) for v in range(1, t + 1))]
    for dim in range(2, n + 1):
        nxt = []
        for chain in chains:
            nxt.extend(tuple(c) for c in _peel(chain, t))
        chains = nxt
        logger.debug(f"BTK 構成: t={t} 次元={dim} 鎖数={len(chains)}")

    return Scd.from_chains(chains, n * (t - 1))


def grid_to_mask(x: tuple[int, ...]) -> int:
    """[2]^n の点 → 2^[n] のマスク（x_{k+1} = 2 ⇔ bit k）"""
    return sum(1 << k for k, v in enumerate(x) if v == 2)


def btk_boolean(n: int, budget: int | None = None) -> Scd:
    """btk_decomposition(2, n) をブール束の要素で表した SCD"""
    scd = btk_decomposition(2, n, budget)
    return Scd.from_chains([[grid_to_mask(x) for x in chain] for chain in scd.chains], n)
