"""Box arithmetic and the line/paragraph clustering used to build super-boxes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import Box


@dataclass(frozen=True)
class ClusterParams:
    """Thresholds for merging fragments into lines and lines into paragraphs.

    Overlap ratios are measured against the smaller box's extent on that axis.
    Gap limits are multiples of the mean box height of the set being clustered.
    """

    line_v_overlap_min: float = 0.5
    line_h_gap_max: float = 0.5
    para_h_overlap_min: float = 0.5
    para_v_gap_max: float = 0.5

    def __post_init__(self) -> None:
        for name in ("line_v_overlap_min", "para_h_overlap_min"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("line_h_gap_max", "para_v_gap_max"):
            v = getattr(self, name)
            if not v >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {v}")


def intersection_area(a: Box, b: Box) -> float:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: Box, b: Box) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def hull(a: Box, b: Box) -> Box:
    return Box(min(a.x1, b.x1), min(a.y1, b.y1), max(a.x2, b.x2), max(a.y2, b.y2))


def _overlap_ratio(a1: float, a2: float, b1: float, b2: float) -> float:
    overlap = min(a2, b2) - max(a1, b1)
    if overlap <= 0:
        return 0.0
    return overlap / min(a2 - a1, b2 - b1)


def _gap(a1: float, a2: float, b1: float, b2: float) -> float:
    # negative when the intervals overlap
    return max(a1, b1) - min(a2, b2)


def _same_line(a: Box, b: Box, params: ClusterParams, mean_h: float) -> bool:
    return (
        _overlap_ratio(a.y1, a.y2, b.y1, b.y2) >= params.line_v_overlap_min
        and _gap(a.x1, a.x2, b.x1, b.x2) <= params.line_h_gap_max * mean_h
    )


def _same_paragraph(a: Box, b: Box, params: ClusterParams, mean_h: float) -> bool:
    return (
        _overlap_ratio(a.x1, a.x2, b.x1, b.x2) >= params.para_h_overlap_min
        and _gap(a.y1, a.y2, b.y1, b.y2) <= params.para_v_gap_max * mean_h
    )


def _interiors_meet(a: Box, b: Box, params: ClusterParams, mean_h: float) -> bool:
    return intersection_area(a, b) > 0


def _merge_pass(groups: list[tuple[Box, list[int]]], rule, params: ClusterParams) -> bool:
    """Merge pairs satisfying ``rule`` until none is left. Returns True if anything merged."""
    if len(groups) < 2:
        return False
    mean_h = sum(g[0].height for g in groups) / len(groups)
    merged_any = False
    restart = True
    while restart:
        restart = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if rule(groups[i][0], groups[j][0], params, mean_h):
                    box_i, members_i = groups[i]
                    box_j, members_j = groups.pop(j)
                    groups[i] = (hull(box_i, box_j), members_i + members_j)
                    merged_any = restart = True
                    break
            if restart:
                break
    return merged_any


def cluster_groups(
    boxes: Sequence[Box], params: ClusterParams | None = None
) -> list[tuple[Box, tuple[int, ...]]]:
    """Cluster ``boxes`` and report which input indices went into each hull.

    Line merging runs first, then paragraph merging, then any hulls whose
    interiors intersect are fused. The three passes repeat until a full round
    changes nothing, which makes the result a fixpoint of the procedure.
    Output is ordered by (top, left) of the merged boxes.
    """
    params = params or ClusterParams()
    groups: list[tuple[Box, list[int]]] = [(b, [i]) for i, b in enumerate(boxes)]
    while True:
        changed = _merge_pass(groups, _same_line, params)
        changed |= _merge_pass(groups, _same_paragraph, params)
        changed |= _merge_pass(groups, _interiors_meet, params)
        if not changed:
            break
    out = [(box, tuple(sorted(members))) for box, members in groups]
    out.sort(key=lambda g: (g[0].y1, g[0].x1, g[0].y2, g[0].x2, g[1]))
    return out


def cluster_boxes(boxes: Sequence[Box], params: ClusterParams | None = None) -> list[Box]:
    return [box for box, _ in cluster_groups(boxes, params)]
