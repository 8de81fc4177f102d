# scdkit/snmf.py
"""
scaled normalized matching flow（SNMF）。

レベル対 (L_i, L_{i+1}) ごとに独立な輸送問題として解く:
    x ∈ L_i の上向きの和 = 1、y ∈ L_{i+1} の下向きの和 = |L_i|/|L_{i+1}|
容量と流量は全て整数に拡大して networkx の最大流で解くので、得られる重みは厳密な有理数。
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import networkx as nx
import networkx.algorithms.flow as flow

from scdkit.config import get_settings
from scdkit.errors import InfeasibleFlowError, InvalidParameterError
from scdkit.gadget import EdgeWeights, ThreeLevelPoset
from scdkit.poset_core import GradedPoset, LevelBigraph, level_bigraph

logger = logging.getLogger(__name__)

SOURCE, SINK = ("s", 0), ("t", 0)


# ----------------------------------
# 型
# ----------------------------------
@dataclass(frozen=True)
class PairFlow:
    i: int
    lower_size: int
    upper_size: int
    weights: dict[tuple[int, int], Fraction]
    # 最小化したときの最適値（最小化していなければ None）
    optimum: Fraction | None = None

    @property
    def max_weight(self) -> Fraction:
        return max(self.weights.values(), default=Fraction(0))


@dataclass
class Snmf:
    kind: str
    t: int
    n: int
    pairs: dict[int, PairFlow] = field(default_factory=dict)

    def max_weight(self) -> Fraction:
        return max((p.max_weight for p in self.pairs.values()), default=Fraction(0))

    def to_json_dict(self, poset: GradedPoset) -> dict[str, Any]:
        out = []
        for i in sorted(self.pairs):
            pair = self.pairs[i]
            lower, upper = poset.levels[i], poset.levels[i + 1]
            out.append({
                "i": i,
                "lower_size": pair.lower_size,
                "upper_size": pair.upper_size,
                "max_weight": str(pair.max_weight),
                "edges": [
                    {
                        "from": poset.encode(lower[u]),
                        "to": poset.encode(upper[v]),
                        "weight": float(w),
                        "weight_exact": str(w),
                    }
                    for (u, v), w in sorted(pair.weights.items())
                ],
            })
        return {"poset": {"kind": self.kind, "t": self.t, "n": self.n}, "pairs": out}


# ----------------------------------
# 最大流による可否判定
# ----------------------------------
def _flow_network(bg: LevelBigraph, supply: int, demand: int, cap: int) -> nx.DiGraph:
    g = nx.DiGraph()
    for u in range(len(bg.up)):
        g.add_edge(SOURCE, ("x", u), capacity=supply)
    for v in range(len(bg.down)):
        g.add_edge(("y", v), SINK, capacity=demand)
    for u, v in bg.edges():
        g.add_edge(("x", u), ("y", v), capacity=cap)
    return g


def _solve(bg: LevelBigraph, scale: int, cap: int) -> dict[tuple[int, int], int] | None:
    """
    weight × scale を整数流量とする。scale は |L_{i+1}| の倍数であること。
    実行可能なら辺ごとの整数流量、そうでなければ None。
    """
    a, b = len(bg.up), len(bg.down)
    supply = scale
    demand = scale * a // b
    g = _flow_network(bg, supply, demand, cap)
    value, flows = flow.maximum_flow(g, SOURCE, SINK)
    if value != supply * a:
        return None
    return {(u, v): flows[("x", u)][("y", v)] for u, v in bg.edges()}


def _base_scale(bg: LevelBigraph) -> int:
    """下界 max(1/上次数, (a/b)/下次数) が整数容量で正確に表せる最小の拡大率"""
    degrees = [d for d in bg.lower_degrees + bg.upper_degrees if d]
    return len(bg.down) * math.lcm(*degrees)


def _to_weights(flows: dict[tuple[int, int], int], scale: int) -> dict[tuple[int, int], Fraction]:
    return {e: Fraction(g, scale) for e, g in flows.items() if g}


def pair_feasible(poset: GradedPoset, i: int, cap: Fraction) -> bool:
    """全ての辺の重みを cap 以下にした SNMF がレベル対 i に存在するか"""
    cap = Fraction(cap)
    bg = level_bigraph(poset, i)
    scale = _base_scale(bg) * cap.denominator
    return _solve(bg, scale, int(cap * scale)) is not None


def _weight_lower_bound(bg: LevelBigraph) -> Fraction:
    a, b = len(bg.up), len(bg.down)
    lb_up = max(Fraction(1, d) for d in bg.lower_degrees)
    lb_down = max(Fraction(a, b) / d for d in bg.upper_degrees)
    return max(lb_up, lb_down)


def _solve_pair(bg: LevelBigraph, minimize: bool, scale_target: int, tolerance: float) -> PairFlow:
    a, b = len(bg.up), len(bg.down)
    if any(d == 0 for d in bg.lower_degrees + bg.upper_degrees):
        raise InfeasibleFlowError(f"レベル対 {bg.i} に孤立点があります", i=bg.i)
    base = _base_scale(bg)

    if not minimize:
        flows = _solve(bg, base, base)
        if flows is None:
            raise InfeasibleFlowError(f"レベル対 {bg.i} の SNMF が見つかりません", i=bg.i)
        return PairFlow(bg.i, a, b, _to_weights(flows, base))

    # 下界で実行可能ならそれが最適（ブール束はここで終わる）
    lower = _weight_lower_bound(bg)
    flows = _solve(bg, base, int(lower * base))
    if flows is not None:
        logger.debug(f"レベル対 {bg.i}: 下界 {lower} で実行可能")
        return PairFlow(bg.i, a, b, _to_weights(flows, base), optimum=lower)

    # 整数容量の二分探索。lo は実行不可能、hi は実行可能
    scale = base * max(1, -(-scale_target // base))
    lo, hi = int(lower * scale), scale
    best = _solve(bg, scale, hi)
    if best is None:
        raise InfeasibleFlowError(f"レベル対 {bg.i} の SNMF が見つかりません", i=bg.i)
    steps = 0
    while hi - lo > 1 and Fraction(hi - lo, scale) > tolerance:
        mid = (lo + hi) // 2
        found = _solve(bg, scale, mid)
        if found is None:
            lo = mid
        else:
            hi, best = mid, found
        steps += 1
    logger.debug(f"レベル対 {bg.i}: 二分探索 {steps} 回 W*={float(Fraction(hi, scale)):.12f}")
    return PairFlow(bg.i, a, b, _to_weights(best, scale), optimum=Fraction(hi, scale))


def _solve_pair_task(args: tuple[LevelBigraph, bool, int, float]) -> PairFlow:
    return _solve_pair(*args)


def _pair_range(poset: GradedPoset, level_range: tuple[int, int] | None) -> list[int]:
    last = poset.total_rank - 1
    if level_range is None:
        return list(range(last + 1))
    lo, hi = level_range
    if not 0 <= lo <= hi <= last:
        raise InvalidParameterError(f"レベル対の範囲が不正です: {lo}..{hi}（0..{last}）", lo=lo, hi=hi)
    return list(range(lo, hi + 1))


def _run(poset: GradedPoset, pairs: list[int], minimize: bool, workers: int | None,
         tolerance: float | None) -> Snmf:
    settings = get_settings()
    tol = tolerance if tolerance is not None else settings.snmf_tolerance
    n_workers = workers if workers is not None else settings.workers()
    tasks = [(level_bigraph(poset, i), minimize, settings.snmf_scale, tol) for i in pairs]
    if n_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_solve_pair_task, tasks))
    else:
        results = [_solve_pair(*task) for task in tasks]
    snmf = Snmf(poset.kind, poset.t, poset.n, {r.i: r for r in results})
    logger.info(f"SNMF: {poset.kind} t={poset.t} n={poset.n} レベル対={len(results)} 最大重み={float(snmf.max_weight()):.6f}")
    return snmf


# ----------------------------------
# 公開 API
# ----------------------------------
def compute_snmf(poset: GradedPoset, level_range: tuple[int, int] | None = None,
                 workers: int | None = None) -> Snmf:
    return _run(poset, _pair_range(poset, level_range), False, workers, None)


def minimize_max_weight(poset: GradedPoset, level_range: tuple[int, int] | None = None,
                        workers: int | None = None,
                        tolerance: float | None = None) -> tuple[Snmf, Fraction]:
    snmf = _run(poset, _pair_range(poset, level_range), True, workers, tolerance)
    return snmf, snmf.max_weight()


@dataclass
class SnmfReport:
    violations: list[dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_snmf(poset: GradedPoset, snmf: Snmf, tolerance: float | None = None) -> SnmfReport:
    """頂点ごとに上向き・下向きの和を検査する（Fraction は厳密、float は tolerance）"""
    tol = tolerance if tolerance is not None else get_settings().snmf_tolerance
    report = SnmfReport()
    for i, pair in sorted(snmf.pairs.items()):
        bg = level_bigraph(poset, i)
        a, b = len(bg.up), len(bg.down)
        for (u, v), w in pair.weights.items():
            if w < 0 or v not in bg.up[u]:
                report.violations.append({"i": i, "edge": [u, v], "condition": "not_cover_edge"})
        up = [sum((pair.weights.get((u, v), 0) for v in vs), Fraction(0)) for u, vs in enumerate(bg.up)]
        down = [sum((pair.weights.get((u, v), 0) for u in us), Fraction(0)) for v, us in enumerate(bg.down)]
        for label, sums, target in (("up_sum", up, Fraction(1)), ("down_sum", down, Fraction(a, b))):
            for idx, s in enumerate(sums):
                exact = isinstance(s, Fraction)
                bad = s != target if exact else abs(float(s) - float(target)) > tol
                if bad:
                    report.violations.append(
                        {"i": i, "vertex": idx, "condition": label, "sum": str(s), "expected": str(target)}
                    )
    return report


def restrict_to_three_level(snmf: Snmf, poset: GradedPoset,
                            p3: ThreeLevelPoset) -> tuple[EdgeWeights, EdgeWeights]:
    """
    スライスまたは貼り合わせた 3 レベル poset へ制限する（制限も SNMF になる）。
    X–Y は Y の下端、Y–Z は Y の上端の重みを使う。
    """
    if p3.x_level is None or p3.y_levels is None:
        raise InvalidParameterError("元の poset 上の位置を持たない 3 レベル poset です")
    lower_pair, upper_pair = p3.x_level, p3.y_levels[1]
    for i in (lower_pair, upper_pair):
        if i not in snmf.pairs:
            raise InvalidParameterError(f"SNMF にレベル対 {i} がありません", i=i)
    below, above = snmf.pairs[lower_pair].weights, snmf.pairs[upper_pair].weights
    bottom_idx = [poset.locate(p3.y_bottom(j))[1] for j in range(p3.b)]
    top_idx = [poset.locate(p3.y_top(j))[1] for j in range(p3.b)]

    f_xy = {
        (x, y): below.get((x, bottom_idx[y]), Fraction(0))
        for x, ys in enumerate(p3.xy) for y in ys
    }
    f_yz = {
        (y, z): above.get((top_idx[y], z), Fraction(0))
        for y, zs in enumerate(p3.yz) for z in zs
    }
    return f_xy, f_yz


def layer_max_weights(poset: GradedPoset, snmf: Snmf) -> list[Fraction]:
    """
    層 s = 1..(拡張回数) ごとの、貼り合わせた gadget の側辺の最大重み W_s。
    X 側は下側の対 lo−s の f、Z 側は上側の対 hi+s−1 の (|L_{i+1}|/|L_i|)·f。
    """
    m_total = poset.total_rank
    lo = m_total // 2
    hi = lo if m_total % 2 == 0 else lo + 1
    out = []
    for s in range(1, lo + 1):
        lower, upper = lo - s, hi + s - 1
        if lower not in snmf.pairs or upper not in snmf.pairs:
            raise InvalidParameterError(f"層 {s} に必要なレベル対 {lower}, {upper} が SNMF にありません", s=s)
        pair = snmf.pairs[upper]
        z_side = Fraction(pair.upper_size, pair.lower_size) * pair.max_weight
        out.append(max(snmf.pairs[lower].max_weight, z_side))
    return out


def required_pairs(poset: GradedPoset, layers: int | None = None) -> Sequence[int]:
    """層 1..layers の貼り合わせが使うレベル対（昇順）"""
    m_total = poset.total_rank
    lo = m_total // 2
    hi = lo if m_total % 2 == 0 else lo + 1
    count = lo if layers is None else min(layers, lo)
    return sorted({i for s in range(1, count + 1) for i in (lo - s, hi + s - 1)})
