# scdkit/gadget.py
"""
3 レベル poset（X, Y, Z）の重み付き二部グラフ（gadget）。

行は Y_1 → X、列は Y_2 → Z の順（各部は canonical order）。
- copy 辺   (y_1, y_2)        : 重み 1 − a/b
- X 側の辺  (x, y_2), x ≺ y   : 正則なら 1/r、SNMF なら f(xy)
- Z 側の辺  (y_1, z), y ≺ z   : 正則なら 1/r、SNMF なら (a/b)·f(yz)
完全マッチングと SCD は 1 対 1 に対応する。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Mapping, Sequence, Union

from scdkit.config import get_settings
from scdkit.errors import (
    ForeignElementError,
    InvalidParameterError,
    InvalidScdError,
    NotAnSnmfError,
    NotAPerfectMatchingError,
    NotRegularError,
    SchemaError,
)
from scdkit.poset_core import GradedPoset
from scdkit.scd_core import Scd, validate_scd

logger = logging.getLogger(__name__)

Weight = Union[Fraction, float]
EdgeWeights = Mapping[tuple[int, int], Weight]

COPY, X_SIDE, Z_SIDE = "copy", "x_side", "z_side"


# ----------------------------------
# 3 レベル poset
# ----------------------------------
@dataclass(frozen=True, eq=False)
class ThreeLevelPoset:
    """
    要素は (レベル, レベル内 index) のタプル（レベル 0=X, 1=Y, 2=Z）。
    labels は元の poset 上の要素（貼り合わせた Y では (下端, 上端) の組）。
    x_level / y_levels は元の poset 上の位置（SNMF の制限に使う）。glued なら Y は (下端, 上端)。
    """
    x_labels: tuple[Hashable, ...]
    y_labels: tuple[Hashable, ...]
    z_labels: tuple[Hashable, ...]
    xy: tuple[tuple[int, ...], ...]
    yz: tuple[tuple[int, ...], ...]
    x_level: int | None = None
    y_levels: tuple[int, int] | None = None
    glued: bool = False
    yx: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    zy: tuple[tuple[int, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        a, b, c = len(self.x_labels), len(self.y_labels), len(self.z_labels)
        if len(self.xy) != a or len(self.yz) != b:
            raise InvalidParameterError("隣接リストの長さがレベルの大きさと一致しません")
        for ys in self.xy:
            if any(not 0 <= y < b for y in ys):
                raise InvalidParameterError(f"X–Y の隣接 index が範囲外です: {ys}")
        for zs in self.yz:
            if any(not 0 <= z < c for z in zs):
                raise InvalidParameterError(f"Y–Z の隣接 index が範囲外です: {zs}")
        object.__setattr__(self, "xy", tuple(tuple(sorted(ys)) for ys in self.xy))
        object.__setattr__(self, "yz", tuple(tuple(sorted(zs)) for zs in self.yz))
        object.__setattr__(self, "yx", _transpose(self.xy, b))
        object.__setattr__(self, "zy", _transpose(self.yz, c))

    # ----- 基本量 -----
    @property
    def a(self) -> int:
        return len(self.x_labels)

    @property
    def b(self) -> int:
        return len(self.y_labels)

    @property
    def levels(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        return tuple(
            tuple((lv, i) for i in range(len(labels)))
            for lv, labels in enumerate((self.x_labels, self.y_labels, self.z_labels))
        )

    @property
    def total_rank(self) -> int:
        return 2

    @property
    def size(self) -> int:
        return len(self.x_labels) + len(self.y_labels) + len(self.z_labels)

    def __contains__(self, e: object) -> bool:
        if not isinstance(e, tuple) or len(e) != 2:
            return False
        lv, i = e
        return lv in (0, 1, 2) and isinstance(i, int) and 0 <= i < len(self.levels[lv])

    def rank(self, e: tuple[int, int]) -> int:
        if e not in self:
            raise ForeignElementError(f"3 レベル poset に含まれない要素です: {e!r}", element=repr(e))
        return e[0]

    def covers(self, x: tuple[int, int], y: tuple[int, int]) -> bool:
        if x not in self or y not in self or y[0] != x[0] + 1:
            return False
        return y[1] in self.up_indices(x[0], x[1])

    def up_indices(self, level: int, i: int) -> tuple[int, ...]:
        if level == 0:
            return self.xy[i]
        if level == 1:
            return self.yz[i]
        return ()

    def label(self, e: tuple[int, int]) -> Hashable:
        return (self.x_labels, self.y_labels, self.z_labels)[e[0]][e[1]]

    def y_bottom(self, j: int) -> Hashable:
        """Y の j 番目の下端（スライスでは要素そのもの）"""
        if not self.glued:
            return self.y_labels[j]
        return self.y_labels[j][0]

    def y_top(self, j: int) -> Hashable:
        if not self.glued:
            return self.y_labels[j]
        return self.y_labels[j][1]

    def support_adjacency(self) -> tuple[tuple[int, ...], ...]:
        """gadget の台グラフ（行 → 列）。重みに依らず決まる"""
        return _support_adjacency(self)


def _transpose(adj: Sequence[Sequence[int]], width: int) -> tuple[tuple[int, ...], ...]:
    out: list[list[int]] = [[] for _ in range(width)]
    for u, vs in enumerate(adj):
        for v in vs:
            out[v].append(u)
    return tuple(tuple(vs) for vs in out)


def three_level_slice(poset: GradedPoset, i: int) -> ThreeLevelPoset:
    """X = L_i, Y = L_{i+1}, Z = L_{i+2}"""
    if not 0 <= i <= poset.total_rank - 2:
        raise InvalidParameterError(
            f"スライス index が範囲外です: {i}（0..{poset.total_rank - 2}）", i=i
        )
    return ThreeLevelPoset(
        x_labels=poset.levels[i],
        y_labels=poset.levels[i + 1],
        z_labels=poset.levels[i + 2],
        xy=tuple(poset.up_indices(i, u) for u in range(len(poset.levels[i]))),
        yz=tuple(poset.up_indices(i + 1, v) for v in range(len(poset.levels[i + 1]))),
        x_level=i,
        y_levels=(i + 1, i + 1),
    )


# ----------------------------------
# 行列・二部グラフ
# ----------------------------------
def _jsonable(label: Any) -> Any:
    if isinstance(label, tuple):
        return [_jsonable(v) for v in label]
    return label


@dataclass(frozen=True)
class StochasticMatrix:
    entries: tuple[tuple[Weight, ...], ...]
    row_labels: tuple[Any, ...] = ()
    col_labels: tuple[Any, ...] = ()

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for row in self.entries for v in row)

    def row_sums(self) -> list[Weight]:
        return [sum(row, Fraction(0)) for row in self.entries]

    def col_sums(self) -> list[Weight]:
        return [sum(col, Fraction(0)) for col in zip(*self.entries)]

    def is_doubly_stochastic(self, tolerance: float | None = None) -> bool:
        if any(v < 0 for row in self.entries for v in row):
            return False
        sums = self.row_sums() + self.col_sums()
        if self.is_exact:
            return all(s == 1 for s in sums)
        tol = tolerance if tolerance is not None else get_settings().float_tolerance
        return all(abs(float(s) - 1.0) <= tol for s in sums)

    def to_json_dict(self) -> dict[str, Any]:
        rows = []
        for row in self.entries:
            cells = []
            for j, v in enumerate(row):
                if v == 0:
                    continue
                q = Fraction(v)
                cells.append({"col": j, "num": q.numerator, "den": q.denominator})
            rows.append(cells)
        return {
            "size": self.size,
            "rows": rows,
            "vertex_maps": {
                "rows": [_jsonable(lb) for lb in self.row_labels],
                "cols": [_jsonable(lb) for lb in self.col_labels],
            },
        }


def matrix_from_json_dict(doc: Mapping[str, Any]) -> StochasticMatrix:
    try:
        k = int(doc["size"])
        entries = [[Fraction(0)] * k for _ in range(k)]
        for i, cells in enumerate(doc["rows"]):
            for cell in cells:
                entries[i][int(cell["col"])] = Fraction(int(cell["num"]), int(cell["den"]))
    except (KeyError, TypeError, ValueError, IndexError, ZeroDivisionError) as e:
        raise SchemaError(f"行列 JSON の形式が不正です: {e}")
    if len(doc["rows"]) != k:
        raise SchemaError(f"rows の数 {len(doc['rows'])} ≠ size {k}")
    maps = doc.get("vertex_maps") or {}
    return StochasticMatrix(
        entries=tuple(tuple(row) for row in entries),
        row_labels=tuple(maps.get("rows", ())),
        col_labels=tuple(maps.get("cols", ())),
    )


@dataclass(frozen=True)
class GadgetEdge:
    row: int
    col: int
    weight: Weight
    tag: str


@dataclass(frozen=True)
class WeightedBigraph:
    p3: ThreeLevelPoset
    edges: tuple[GadgetEdge, ...]
    mode: str
    r: int | None = None

    @property
    def size(self) -> int:
        return self.p3.a + self.p3.b

    def row_labels(self) -> tuple[Any, ...]:
        p3 = self.p3
        return tuple(("Y1", p3.y_labels[j]) for j in range(p3.b)) + tuple(
            ("X", p3.x_labels[i]) for i in range(p3.a)
        )

    def col_labels(self) -> tuple[Any, ...]:
        p3 = self.p3
        return tuple(("Y2", p3.y_labels[j]) for j in range(p3.b)) + tuple(
            ("Z", p3.z_labels[k]) for k in range(len(p3.z_labels))
        )

    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.size)]
        for e in self.edges:
            adj[e.row].append(e.col)
        return tuple(tuple(sorted(cols)) for cols in adj)

    def row_degrees(self) -> list[int]:
        return [len(cols) for cols in self.adjacency()]

    def matrix(self) -> StochasticMatrix:
        k = self.size
        entries: list[list[Weight]] = [[Fraction(0)] * k for _ in range(k)]
        for e in self.edges:
            entries[e.row][e.col] = e.weight
        return StochasticMatrix(
            entries=tuple(tuple(row) for row in entries),
            row_labels=self.row_labels(),
            col_labels=self.col_labels(),
        )

    def matching_weight(self, m: Sequence[int]) -> Weight:
        w: Weight = Fraction(1)
        lookup = {(e.row, e.col): e.weight for e in self.edges}
        for row, col in enumerate(m):
            w *= lookup[(row, col)]
        return w


def _assemble(p3: ThreeLevelPoset, x_weight, z_weight) -> list[GadgetEdge]:
    """重みが 0 の辺は台に含めない（a = b なら copy 辺は現れない）"""
    a, b = p3.a, p3.b
    edges: list[GadgetEdge] = []
    copy_w = 1 - Fraction(a, b) if b else Fraction(0)
    if copy_w:
        edges.extend(GadgetEdge(j, j, copy_w, COPY) for j in range(b))
    for x, ys in enumerate(p3.xy):
        for y in ys:
            w = x_weight(x, y)
            if w:
                edges.append(GadgetEdge(b + x, y, w, X_SIDE))
    for y, zs in enumerate(p3.yz):
        for z in zs:
            w = z_weight(y, z)
            if w:
                edges.append(GadgetEdge(y, b + z, w, Z_SIDE))
    edges.sort(key=lambda e: (e.row, e.col))
    return edges


def _support_adjacency(p3: ThreeLevelPoset) -> tuple[tuple[int, ...], ...]:
    adj: list[list[int]] = [[] for _ in range(p3.a + p3.b)]
    for e in _assemble(p3, lambda x, y: 1, lambda y, z: 1):
        adj[e.row].append(e.col)
    return tuple(tuple(cols) for cols in adj)


def _check_shape(p3: ThreeLevelPoset) -> None:
    if len(p3.z_labels) != p3.a:
        raise InvalidParameterError(f"|X|={p3.a} と |Z|={len(p3.z_labels)} が一致しません")
    if p3.a > p3.b:
        raise InvalidParameterError(f"|X|={p3.a} が |Y|={p3.b} を超えています")


# ----------------------------------
# gadget 構成
# ----------------------------------
def build_gadget_regular(p3: ThreeLevelPoset) -> WeightedBigraph:
    """次数 r を X の先頭から推定し、X → Z → Y の順に正則性を検査する"""
    a, b = p3.a, p3.b
    r = len(p3.xy[0]) if a else 0
    if r == 0:
        raise NotRegularError("X の頂点の次数が 0 です", vertex=repr(p3.x_labels[0]) if a else None, degree=0)
    for x, ys in enumerate(p3.xy):
        if len(ys) != r:
            raise NotRegularError(
                f"X の頂点 {p3.x_labels[x]!r} の次数 {len(ys)} ≠ r={r}",
                vertex=repr(p3.x_labels[x]), degree=len(ys), r=r,
            )
    for z, ys in enumerate(p3.zy):
        if len(ys) != r:
            raise NotRegularError(
                f"Z の頂点 {p3.z_labels[z]!r} の次数 {len(ys)} ≠ r={r}",
                vertex=repr(p3.z_labels[z]), degree=len(ys), r=r,
            )
    _check_shape(p3)
    if (r * a) % b:
        raise NotRegularError(f"r·a/b = {r}·{a}/{b} が整数になりません", r=r, a=a, b=b)
    y_deg = r * a // b
    for y in range(b):
        for side, deg in (("X", len(p3.yx[y])), ("Z", len(p3.yz[y]))):
            if deg != y_deg:
                raise NotRegularError(
                    f"Y の頂点 {p3.y_labels[y]!r} の {side} 側次数 {deg} ≠ r·a/b={y_deg}",
                    vertex=repr(p3.y_labels[y]), degree=deg, r=r,
                )

    w = Fraction(1, r)
    edges = _assemble(p3, lambda x, y: w, lambda y, z: w)
    g = WeightedBigraph(p3=p3, edges=tuple(edges), mode="regular", r=r)
    if not g.matrix().is_doubly_stochastic():
        raise NotRegularError("gadget 行列が二重確率行列になりません", r=r)
    logger.debug(f"正則 gadget: a={a} b={b} r={r} 辺数={len(edges)}")
    return g


def _check_sums(label: str, sums: Sequence[Weight], target: Fraction, exact: bool,
                tolerance: float, names: Sequence[Hashable]) -> None:
    for v, s in enumerate(sums):
        ok = (s == target) if exact else abs(float(s) - float(target)) <= tolerance
        if not ok:
            raise NotAnSnmfError(
                f"{label} の頂点 {names[v]!r} の和が {s}（期待値 {target}）です",
                vertex=repr(names[v]), total=str(s), expected=str(target),
            )


def build_gadget_snmf(p3: ThreeLevelPoset, f_xy: EdgeWeights, f_yz: EdgeWeights,
                      tolerance: float | None = None) -> WeightedBigraph:
    """
    f_xy[(x, y)], f_yz[(y, z)] は 3 レベル poset の index で与える。
    全て Fraction なら和の検査は厳密、float を含めば tolerance で判定。
    """
    _check_shape(p3)
    a, b = p3.a, p3.b
    tol = tolerance if tolerance is not None else get_settings().snmf_tolerance
    for (x, y) in f_xy:
        if not (0 <= x < a and y in p3.xy[x]):
            raise NotAnSnmfError(f"X–Y の辺ではありません: {(x, y)}", edge=[x, y])
    for (y, z) in f_yz:
        if not (0 <= y < b and z in p3.yz[y]):
            raise NotAnSnmfError(f"Y–Z の辺ではありません: {(y, z)}", edge=[y, z])
    if any(w < 0 for w in list(f_xy.values()) + list(f_yz.values())):
        raise NotAnSnmfError("負の重みがあります")

    exact = all(isinstance(w, (int, Fraction)) for w in list(f_xy.values()) + list(f_yz.values()))
    zero = Fraction(0)
    x_up = [sum((f_xy.get((x, y), zero) for y in ys), zero) for x, ys in enumerate(p3.xy)]
    y_down = [sum((f_xy.get((x, y), zero) for x in xs), zero) for y, xs in enumerate(p3.yx)]
    y_up = [sum((f_yz.get((y, z), zero) for z in zs), zero) for y, zs in enumerate(p3.yz)]
    z_down = [sum((f_yz.get((y, z), zero) for y in ys), zero) for z, ys in enumerate(p3.zy)]
    _check_sums("X（上向き）", x_up, Fraction(1), exact, tol, p3.x_labels)
    _check_sums("Y（下向き）", y_down, Fraction(a, b), exact, tol, p3.y_labels)
    _check_sums("Y（上向き）", y_up, Fraction(1), exact, tol, p3.y_labels)
    _check_sums("Z（下向き）", z_down, Fraction(b, a), exact, tol, p3.z_labels)

    ratio: Weight = Fraction(a, b) if exact else a / b
    edges = _assemble(
        p3,
        lambda x, y: f_xy.get((x, y), zero),
        lambda y, z: ratio * f_yz.get((y, z), zero),
    )
    g = WeightedBigraph(p3=p3, edges=tuple(edges), mode="snmf")
    if not g.matrix().is_doubly_stochastic(tol):
        raise NotAnSnmfError("gadget 行列が二重確率行列になりません")
    logger.debug(f"SNMF gadget: a={a} b={b} 厳密={exact} 辺数={len(edges)}")
    return g


# ----------------------------------
# マッチング ↔ SCD
# ----------------------------------
def _as_row_map(m: Sequence[int] | Iterable[tuple[int, int]], size: int) -> tuple[int, ...]:
    """列リスト（行ごと）または (行, 列) の組の集まりを列リストへ正規化する"""
    items = list(m)
    if all(isinstance(v, int) for v in items):
        cols = items
    else:
        by_row: dict[int, int] = {}
        for row, col in items:
            if row in by_row:
                raise NotAPerfectMatchingError(f"行 {row} が 2 回マッチしています", row=row)
            by_row[row] = col
        missing = [r for r in range(size) if r not in by_row]
        if missing:
            raise NotAPerfectMatchingError(f"マッチしていない行があります: {missing}", rows=missing)
        cols = [by_row[r] for r in range(size)]
    if len(cols) != size:
        raise NotAPerfectMatchingError(f"マッチングの大きさ {len(cols)} ≠ {size}")
    if sorted(cols) != list(range(size)):
        raise NotAPerfectMatchingError("列が重複または欠落しています")
    return tuple(cols)


def _check_matching(g: WeightedBigraph, m: Sequence[int] | Iterable[tuple[int, int]]) -> tuple[int, ...]:
    cols = _as_row_map(m, g.size)
    adj = g.adjacency()
    for row, col in enumerate(cols):
        if col not in adj[row]:
            raise NotAPerfectMatchingError(f"({row}, {col}) は gadget の辺ではありません", row=row, col=col)
    return cols


def matching_to_scd(g: WeightedBigraph, m: Sequence[int] | Iterable[tuple[int, int]]) -> Scd:
    """y_1→y_2 なら y は単独の鎖。そうでなければ y_2 に入る x と y_1 から出る z で鎖 {x, y, z}"""
    cols = _check_matching(g, m)
    b = g.p3.b
    x_of = {col: row - b for row, col in enumerate(cols) if row >= b}
    chains = []
    for y in range(b):
        col = cols[y]
        if col == y:
            chains.append(((1, y),))
        else:
            chains.append(((0, x_of[y]), (1, y), (2, col - b)))
    return Scd.from_chains(chains, 2)


def scd_to_matching(g: WeightedBigraph, scd: Scd) -> tuple[int, ...]:
    p3 = g.p3
    try:
        report = validate_scd(p3, scd)
    except ForeignElementError as e:
        raise InvalidScdError(f"SCD が 3 レベル poset の要素以外を含みます: {e.message}")
    if not report.ok:
        raise InvalidScdError(
            "SCD として不正です", violations=[v.condition for v in report.violations]
        )
    b = p3.b
    cols = [-1] * g.size
    for chain in scd.chains:
        if len(chain) == 1:
            (_, y), = chain
            cols[y] = y
        else:
            (_, x), (_, y), (_, z) = chain
            cols[b + x] = y
            cols[y] = b + z
    try:
        return _check_matching(g, cols)
    except NotAPerfectMatchingError as e:
        raise InvalidScdError(f"SCD が gadget の台に含まれない辺を使っています: {e.message}")
