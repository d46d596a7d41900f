"""Optimal IoU matching and the confidence-free two-stage detection F1.

Stage 1 matches predicted and ground-truth boxes one-to-one (maximum total IoU)
and keeps pairs at or above the IoU threshold. Leftover boxes on each side are
clustered into super-boxes, matched again, and the second-round hits are added
to the true positives. Unmatched super-boxes become false positives/negatives.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .geometry import ClusterParams, cluster_groups, iou
from .model import Block, Box


class EvalMode(str, enum.Enum):
    CATEGORY_AWARE = "category-aware"
    CATEGORY_AGNOSTIC = "category-agnostic"

    @classmethod
    def parse(cls, value: str | EvalMode) -> EvalMode:
        if isinstance(value, EvalMode):
            return value
        try:
            return cls(value.replace("_", "-"))
        except ValueError:
            raise ValueError(f"unknown mode {value!r}; expected category-aware or category-agnostic") from None


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]
    unmatched_pred: frozenset[int]
    unmatched_gt: frozenset[int]

    @property
    def total_iou(self) -> float:
        return math.fsum(p[2] for p in self.pairs)


@dataclass(frozen=True)
class DetectionTally:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"negative count in {self}")

    def __add__(self, other: DetectionTally) -> DetectionTally:
        return DetectionTally(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.tp, self.fp, self.fn)


@dataclass(frozen=True)
class DetectionScore:
    precision: float
    recall: float
    f1: float
    tally: DetectionTally

    @classmethod
    def from_tally(cls, tally: DetectionTally) -> DetectionScore:
        tp, fp, fn = tally.as_tuple()
        if tp == fp == fn == 0:
            # nothing predicted and nothing to find
            return cls(1.0, 1.0, 1.0, tally)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision, recall, f1, tally)


@dataclass(frozen=True)
class PairedGroup:
    """One detection hit: a group of predicted blocks matched to a group of GT blocks.

    Stage-1 hits always have one index per side.
    """

    pred: tuple[int, ...]
    gt: tuple[int, ...]
    iou: float
    stage: int


@dataclass(frozen=True)
class TwoStageResult:
    tally: DetectionTally
    per_category: Mapping[str, DetectionTally]
    pairs: tuple[PairedGroup, ...]
    unmatched_pred: frozenset[int]
    unmatched_gt: frozenset[int]

    @property
    def score(self) -> DetectionScore:
        return DetectionScore.from_tally(self.tally)


def hungarian(weights: Sequence[Sequence[int]]) -> list[int]:
    """Maximum-weight assignment of every row to a distinct column.

    Requires ``len(weights) <= len(weights[0])``. Returns the column chosen for
    each row. Works on any exactly-ordered numeric type; callers pass ints so
    that optimality is decided without rounding.
    """
    n = len(weights)
    if n == 0:
        return []
    m = len(weights[0])
    if n > m:
        raise ValueError("hungarian() needs at least as many columns as rows")
    # shortest augmenting path with potentials, minimising negated weights
    u = [0] * (n + 1)
    v = [0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: list = [None] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = weights[i0 - 1]
            delta = None
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = -row[j - 1] - u[i0] - v[j]
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            assignment[p[j] - 1] = j - 1
    return assignment


def _components(n_pred: int, n_gt: int, positive: list[tuple[int, int]]) -> list[tuple[list[int], list[int]]]:
    parent = list(range(n_pred + n_gt))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in positive:
        a, b = find(i), find(n_pred + j)
        if a != b:
            parent[max(a, b)] = min(a, b)
    roots = {find(i) for i, _ in positive}
    comps: dict[int, tuple[list[int], list[int]]] = {r: ([], []) for r in roots}
    for i in range(n_pred):
        root = find(i)
        if root in comps:
            comps[root][0].append(i)
    for j in range(n_gt):
        root = find(n_pred + j)
        if root in comps:
            comps[root][1].append(j)
    return [comps[k] for k in sorted(comps)]


def _solve_component(preds: list[int], gts: list[int], matrix: list[list[float]]) -> list[tuple[int, int]]:
    # Exact objective: IoUs are binary fractions, so scaling by the largest
    # denominator turns them into integers. A tie-break bonus in the low digits
    # selects, among optimal assignments, the lexicographically smallest pair
    # list: pred i's bonus outweighs every later pred's bonus combined.
    ratios = {}
    den = 1
    for a, i in enumerate(preds):
        for b, j in enumerate(gts):
            value = matrix[i][j]
            if value > 0:
                num, d = float(value).as_integer_ratio()
                ratios[a, b] = (num, d)
                den = max(den, d)
    np_, ng = len(preds), len(gts)
    base = ng + 1
    bonus_span = base**np_
    weight = [[0] * ng for _ in range(np_)]
    for (a, b), (num, d) in ratios.items():
        weight[a][b] = num * (den // d) * bonus_span + (ng - b) * base ** (np_ - 1 - a)
    if np_ <= ng:
        cols = hungarian(weight)
        chosen = [(a, cols[a]) for a in range(np_)]
    else:
        transposed = [[weight[a][b] for a in range(np_)] for b in range(ng)]
        rows = hungarian(transposed)
        chosen = [(rows[b], b) for b in range(ng)]
    return [(preds[a], gts[b]) for a, b in chosen if weight[a][b] > 0]


def iou_matrix(preds: Sequence[Box], gts: Sequence[Box]) -> list[list[float]]:
    return [[iou(p, g) for g in gts] for p in preds]


def match_from_matrix(matrix: list[list[float]], n_pred: int, n_gt: int) -> MatchResult:
    positive = [(i, j) for i in range(n_pred) for j in range(n_gt) if matrix[i][j] > 0]
    pairs = []
    for preds, gts in _components(n_pred, n_gt, positive):
        pairs.extend(_solve_component(preds, gts, matrix))
    pairs.sort()
    matched_p = {i for i, _ in pairs}
    matched_g = {j for _, j in pairs}
    return MatchResult(
        pairs=tuple((i, j, matrix[i][j]) for i, j in pairs),
        unmatched_pred=frozenset(range(n_pred)) - matched_p,
        unmatched_gt=frozenset(range(n_gt)) - matched_g,
    )


def optimal_bipartite_match(preds: Sequence[Box], gts: Sequence[Box]) -> MatchResult:
    """Maximum-total-IoU one-to-one matching.

    Zero-IoU assignments are reported as unmatched. Among equally good
    assignments the lexicographically smallest (pred, gt) pair list wins.
    """
    return match_from_matrix(iou_matrix(preds, gts), len(preds), len(gts))


def _check_tau(tau: float) -> None:
    if not (isinstance(tau, (int, float)) and 0.0 < tau <= 1.0):
        raise ValueError(f"IoU threshold must lie in (0, 1], got {tau!r}")


@dataclass
class _PoolResult:
    tally: DetectionTally
    pairs: list[PairedGroup] = field(default_factory=list)
    unmatched_pred: list[int] = field(default_factory=list)
    unmatched_gt: list[int] = field(default_factory=list)


def _two_stage_pool(
    pred_boxes: list[Box], gt_boxes: list[Box], tau: float, params: ClusterParams
) -> _PoolResult:
    first = optimal_bipartite_match(pred_boxes, gt_boxes)
    hits = [PairedGroup((i,), (j,), v, 1) for i, j, v in first.pairs if v >= tau]
    taken_p = {h.pred[0] for h in hits}
    taken_g = {h.gt[0] for h in hits}
    rest_p = [i for i in range(len(pred_boxes)) if i not in taken_p]
    rest_g = [j for j in range(len(gt_boxes)) if j not in taken_g]

    merged_p = cluster_groups([pred_boxes[i] for i in rest_p], params)
    merged_g = cluster_groups([gt_boxes[j] for j in rest_g], params)
    second = optimal_bipartite_match([b for b, _ in merged_p], [b for b, _ in merged_g])
    hit_mp, hit_mg = set(), set()
    for a, b, v in second.pairs:
        if v >= tau:
            hit_mp.add(a)
            hit_mg.add(b)
            hits.append(
                PairedGroup(
                    tuple(rest_p[k] for k in merged_p[a][1]),
                    tuple(rest_g[k] for k in merged_g[b][1]),
                    v,
                    2,
                )
            )
    tally = DetectionTally(
        tp=len(hits),
        fp=len(merged_p) - len(hit_mp),
        fn=len(merged_g) - len(hit_mg),
    )
    unmatched_p = [rest_p[k] for a, (_, members) in enumerate(merged_p) if a not in hit_mp for k in members]
    unmatched_g = [rest_g[k] for b, (_, members) in enumerate(merged_g) if b not in hit_mg for k in members]
    return _PoolResult(tally, hits, unmatched_p, unmatched_g)


def two_stage_match(
    preds: Sequence[Block],
    gts: Sequence[Block],
    tau: float = 0.5,
    mode: EvalMode | str = EvalMode.CATEGORY_AWARE,
    params: ClusterParams | None = None,
) -> TwoStageResult:
    """Run both matching stages and keep the pairing alongside the counts."""
    _check_tau(tau)
    mode = EvalMode.parse(mode)
    params = params or ClusterParams()

    if mode is EvalMode.CATEGORY_AGNOSTIC:
        pools = {None: (list(range(len(preds))), list(range(len(gts))))}
    else:
        pools = defaultdict(lambda: ([], []))
        for i, b in enumerate(preds):
            pools[b.category][0].append(i)
        for j, b in enumerate(gts):
            pools[b.category][1].append(j)

    total = DetectionTally()
    per_category: dict[str, DetectionTally] = {}
    pairs: list[PairedGroup] = []
    unmatched_p: list[int] = []
    unmatched_g: list[int] = []
    for key in sorted(pools, key=lambda k: "" if k is None else k):
        p_idx, g_idx = pools[key]
        res = _two_stage_pool([preds[i].box for i in p_idx], [gts[j].box for j in g_idx], tau, params)
        total = total + res.tally
        if key is not None:
            per_category[key] = res.tally
        for h in res.pairs:
            pairs.append(
                PairedGroup(tuple(p_idx[i] for i in h.pred), tuple(g_idx[j] for j in h.gt), h.iou, h.stage)
            )
        unmatched_p.extend(p_idx[i] for i in res.unmatched_pred)
        unmatched_g.extend(g_idx[j] for j in res.unmatched_gt)

    pairs.sort(key=lambda h: (min(h.pred), h.gt))
    return TwoStageResult(
        tally=total,
        per_category=per_category,
        pairs=tuple(pairs),
        unmatched_pred=frozenset(unmatched_p),
        unmatched_gt=frozenset(unmatched_g),
    )


def two_stage_f1(
    preds: Sequence[Block],
    gts: Sequence[Block],
    tau: float = 0.5,
    mode: EvalMode | str = EvalMode.CATEGORY_AWARE,
    params: ClusterParams | None = None,
) -> DetectionScore:
    """Precision, recall and F1 of the two-stage layout detection metric."""
    return two_stage_match(preds, gts, tau, mode, params).score
