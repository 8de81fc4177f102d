# scdkit/poset_core.py
"""
ブール束 2^[n] とハイパーグリッド [t]^n を graded / rank-symmetric な poset として生成する。

- boolean   : 要素は n ビットのマスク（int）。r(S) = |S|
- hypergrid : 要素は座標タプル (x_1, ..., x_n)、各 x_i ∈ [1, t]。r(x) = Σx_i − n
- 各レベル内は符号化の辞書式順（canonical order）。以降の決定性はすべてこれに依存する
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Iterator, Union

from scdkit.config import get_settings
from scdkit.errors import BudgetExceededError, ForeignElementError, InvalidParameterError, SchemaError

logger = logging.getLogger(__name__)

Element = Union[int, tuple[int, ...]]

KINDS = ("boolean", "hypergrid")


# ----------------------------------
# パラメータ検証
# ----------------------------------
def check_parameters(kind: str, t: int, n: int) -> None:
    if kind not in KINDS:
        raise InvalidParameterError(f"未知の poset 種別です: {kind}", kind=kind)
    if not isinstance(t, int) or not isinstance(n, int) or t < 2 or n < 1:
        raise InvalidParameterError(f"t >= 2, n >= 1 が必要です（t={t}, n={n}）", t=t, n=n)
    if kind == "boolean" and t != 2:
        raise InvalidParameterError(f"boolean では t=2 のみ有効です（t={t}）", t=t)


def check_budget(t: int, n: int, budget: int | None = None) -> None:
    limit = budget if budget is not None else get_settings().element_budget
    if t**n > limit:
        raise BudgetExceededError(
            f"要素数 t^n={t}^{n} が上限 {limit} を超えています", t=t, n=n, budget=limit
        )


# ----------------------------------
# 型
# ----------------------------------
@dataclass(frozen=True, eq=False)
class GradedPoset:
    kind: str
    t: int
    n: int
    levels: tuple[tuple[Element, ...], ...]
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for r, level in enumerate(self.levels):
            for i, e in enumerate(level):
                index[e] = (r, i)
        object.__setattr__(self, "_index", index)

    # ----- 基本量 -----
    @property
    def total_rank(self) -> int:
        return len(self.levels) - 1

    @property
    def size(self) -> int:
        return len(self._index)

    def level_sizes(self) -> list[int]:
        return [len(level) for level in self.levels]

    def middle_size(self) -> int:
        return max(len(level) for level in self.levels)

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind, "t": self.t, "n": self.n}

    def content_key(self) -> str:
        """キャッシュ用の安定キー（descriptor の SHA1）"""
        raw = json.dumps(self.descriptor(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha1(raw.encode("utf-8")).hexdigest()

    # ----- 要素アクセス -----
    def __contains__(self, e: object) -> bool:
        return e in self._index

    def locate(self, e: Element) -> tuple[int, int]:
        """要素 → (rank, レベル内 index)"""
        try:
            return self._index[e]
        except (KeyError, TypeError):
            raise ForeignElementError(f"poset に含まれない要素です: {e!r}", element=repr(e))

    def rank(self, e: Element) -> int:
        return self.locate(e)[0]

    def up_covers(self, e: Element) -> list[Element]:
        """e を被覆する要素（1 座標だけ 1 増やす）を canonical order で返す"""
        if self.kind == "boolean":
            return [e | (1 << k) for k in range(self.n) if not e & (1 << k)]
        ups = [e[:k] + (e[k] + 1,) + e[k + 1:] for k in range(self.n) if e[k] < self.t]
        return sorted(ups)

    def down_covers(self, e: Element) -> list[Element]:
        if self.kind == "boolean":
            return [e & ~(1 << k) for k in reversed(range(self.n)) if e & (1 << k)]
        downs = [e[:k] + (e[k] - 1,) + e[k + 1:] for k in range(self.n) if e[k] > 1]
        return sorted(downs)

    def covers(self, x: Element, y: Element) -> bool:
        """y が x を被覆するか（x ≺· y）"""
        if x not in self._index or y not in self._index:
            return False
        if self._index[y][0] != self._index[x][0] + 1:
            return False
        if self.kind == "boolean":
            return (x & y) == x
        return all(a <= b for a, b in zip(x, y))

    def up_indices(self, level: int, i: int) -> tuple[int, ...]:
        """レベル level の i 番目を被覆する要素の、レベル level+1 内 index"""
        upper = self.levels[level + 1] if level + 1 < len(self.levels) else ()
        if not upper:
            return ()
        return tuple(self._index[y][1] for y in self.up_covers(self.levels[level][i]))

    # ----- JSON -----
    def encode(self, e: Element) -> Any:
        return e if self.kind == "boolean" else list(e)

    def decode(self, raw: Any) -> Element:
        if self.kind == "boolean":
            if not isinstance(raw, int):
                raise SchemaError(f"boolean 要素は整数である必要があります: {raw!r}")
            return raw
        if not isinstance(raw, (list, tuple)):
            raise SchemaError(f"hypergrid 要素は整数配列である必要があります: {raw!r}")
        try:
            return tuple(int(v) for v in raw)
        except (TypeError, ValueError) as e:
            raise SchemaError(f"hypergrid 座標は整数である必要があります: {raw!r}") from e

    def to_json_dict(self) -> dict[str, Any]:
        return {
            **self.descriptor(),
            "levels": [[self.encode(e) for e in level] for level in self.levels],
        }


@dataclass(frozen=True)
class LevelBigraph:
    i: int
    up: tuple[tuple[int, ...], ...]     # L_i の index → L_{i+1} の index 群
    down: tuple[tuple[int, ...], ...]   # L_{i+1} の index → L_i の index 群

    @property
    def lower_degrees(self) -> list[int]:
        return [len(a) for a in self.up]

    @property
    def upper_degrees(self) -> list[int]:
        return [len(a) for a in self.down]

    @property
    def edge_count(self) -> int:
        return sum(self.lower_degrees)

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, ys in enumerate(self.up):
            for v in ys:
                yield u, v


# ----------------------------------
# 生成
# ----------------------------------
def build_poset(kind: str, t: int, n: int, budget: int | None = None) -> GradedPoset:
    check_parameters(kind, t, n)
    check_budget(t, n, budget)

    levels: list[list[Element]] = [[] for _ in range(n * (t - 1) + 1)]
    if kind == "boolean":
        for mask in range(1 << n):
            levels[mask.bit_count()].append(mask)
    else:
        # product は辞書式順に列挙するので、レベル内も辞書式順のまま
        for x in product(range(1, t + 1), repeat=n):
            levels[sum(x) - n].append(x)

    poset = GradedPoset(kind=kind, t=t, n=n, levels=tuple(tuple(level) for level in levels))
    logger.debug(f"poset 生成: {kind} t={t} n={n} levels={poset.level_sizes()}")
    return poset


def poset_from_json_dict(doc: dict[str, Any]) -> GradedPoset:
    """JSON から poset を再構築し、levels が含まれていれば一致を検査する"""
    try:
        kind, t, n = doc["kind"], int(doc["t"]), int(doc["n"])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"poset JSON に必須キーが不足しています: {e}")
    poset = build_poset(kind, t, n)
    if "levels" in doc:
        levels = [[poset.decode(v) for v in level] for level in doc["levels"]]
        if levels != [list(level) for level in poset.levels]:
            raise SchemaError("poset JSON の levels が (kind, t, n) と一致しません")
    return poset


def level_sizes(t: int, n: int) -> list[int]:
    """要素を作らずに各レベルの大きさを返す（座標和の分布を畳み込みで計算）"""
    if not isinstance(t, int) or not isinstance(n, int) or t < 2 or n < 1:
        raise InvalidParameterError(f"t >= 2, n >= 1 が必要です（t={t}, n={n}）", t=t, n=n)
    sizes = [1]
    for _ in range(n):
        nxt = [0] * (len(sizes) + t - 1)
        for r, c in enumerate(sizes):
            for v in range(t):
                nxt[r + v] += c
        sizes = nxt
    return sizes


def level_bigraph(poset: GradedPoset, i: int, edge_threshold: int | None = None) -> LevelBigraph:
    if not 0 <= i < len(poset.levels) - 1:
        raise InvalidParameterError(
            f"レベル index が範囲外です: {i}（0..{len(poset.levels) - 2}）", i=i
        )
    limit = edge_threshold if edge_threshold is not None else get_settings().edge_materialize_threshold
    # 辺数 = Σ_{x ∈ L_i} up-degree <= |L_i|·n。生成前に上限を確認
    if len(poset.levels[i]) * poset.n > limit:
        exact = sum(len(poset.up_covers(x)) for x in poset.levels[i])
        if exact > limit:
            raise BudgetExceededError(
                f"レベル {i} の被覆辺数 {exact} が上限 {limit} を超えています", i=i, edges=exact
            )

    up = tuple(poset.up_indices(i, u) for u in range(len(poset.levels[i])))
    down_lists: list[list[int]] = [[] for _ in poset.levels[i + 1]]
    for u, vs in enumerate(up):
        for v in vs:
            down_lists[v].append(u)
    return LevelBigraph(i=i, up=up, down=tuple(tuple(sorted(d)) for d in down_lists))


def up_degree_histogram(t: int, n: int) -> list[dict[int, int]]:
    """レベルごとの up-degree 分布 {degree: 個数}。要素を作らずに畳み込みで求める"""
    if t < 2 or n < 1:
        raise InvalidParameterError(f"t >= 2, n >= 1 が必要です（t={t}, n={n}）", t=t, n=n)
    # dist[rank][deg] = 個数。座標値 v ∈ 1..t は rank に v-1、v<t なら degree に 1 寄与
    dist: list[dict[int, int]] = [{0: 1}]
    for _ in range(n):
        nxt: list[dict[int, int]] = [dict() for _ in range(len(dist) + t - 1)]
        for r, hist in enumerate(dist):
            for d, c in hist.items():
                for v in range(1, t + 1):
                    dd = d + (1 if v < t else 0)
                    nxt[r + v - 1][dd] = nxt[r + v - 1].get(dd, 0) + c
        dist = nxt
    return dist


def format_element(e: Element) -> str:
    """ログ・エラーメッセージ用の表記"""
    if isinstance(e, int):
        return "{" + ",".join(str(k + 1) for k in range(e.bit_length()) if e >> k & 1) + "}"
    return "(" + ",".join(str(v) for v in e) + ")"
