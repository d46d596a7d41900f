from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docparse_eval.geometry import ClusterParams, cluster_boxes, cluster_groups, iou
from docparse_eval.model import Box


@st.composite
def boxes(draw, extent=60, side=30):
    x1, y1 = draw(st.integers(0, extent)), draw(st.integers(0, extent))
    return Box(x1, y1, x1 + draw(st.integers(1, side)), y1 + draw(st.integers(1, side)))


def exact_iou(a: Box, b: Box) -> Fraction:
    # independent route: count overlap via interval arithmetic on Fractions
    w = max(Fraction(0), min(Fraction(a.x2), Fraction(b.x2)) - max(Fraction(a.x1), Fraction(b.x1)))
    h = max(Fraction(0), min(Fraction(a.y2), Fraction(b.y2)) - max(Fraction(a.y1), Fraction(b.y1)))
    inter = w * h
    area = lambda r: (Fraction(r.x2) - Fraction(r.x1)) * (Fraction(r.y2) - Fraction(r.y1))
    return inter / (area(a) + area(b) - inter)


def test_iou_identity():
    assert iou(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0


def test_iou_disjoint():
    assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0


def test_iou_half_overlap():
    # intersection 2, union 6
    assert exact_iou(Box(0, 0, 2, 2), Box(1, 0, 3, 2)) == Fraction(1, 3)
    assert iou(Box(0, 0, 2, 2), Box(1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-15)


def test_touching_edges_do_not_overlap():
    assert iou(Box(0, 0, 10, 10), Box(10, 0, 20, 10)) == 0.0


@settings(max_examples=300)
@given(boxes(), boxes())
def test_iou_properties(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == (a == b)
    assert v == pytest.approx(float(exact_iou(a, b)), abs=1e-12)


def test_cluster_empty():
    assert cluster_boxes([]) == []


def test_line_fragments_merge():
    # full vertical overlap, gap 4 <= 0.5 * 20
    assert cluster_boxes([Box(0, 0, 48, 20), Box(52, 0, 100, 20)]) == [Box(0, 0, 100, 20)]


def test_distant_lines_stay_apart():
    # same column, but the vertical gap (180) is far beyond 0.5 * 20
    out = cluster_boxes([Box(0, 0, 48, 20), Box(0, 200, 48, 220)])
    assert out == [Box(0, 0, 48, 20), Box(0, 200, 48, 220)]


def test_paragraph_merge_after_lines():
    lines = [Box(0, 0, 40, 10), Box(42, 0, 90, 10), Box(0, 13, 85, 23), Box(0, 26, 60, 36)]
    assert cluster_boxes(lines) == [Box(0, 0, 90, 36)]


def test_columns_do_not_merge():
    left = [Box(0, y, 100, y + 10) for y in (0, 12, 24)]
    right = [Box(200, y, 300, y + 10) for y in (0, 12, 24)]
    assert cluster_boxes(left + right) == [Box(0, 0, 100, 34), Box(200, 0, 300, 34)]


def test_output_sorted_top_then_left():
    out = cluster_boxes([Box(500, 100, 510, 110), Box(0, 100, 10, 110), Box(300, 0, 310, 10)])
    assert out == [Box(300, 0, 310, 10), Box(0, 100, 10, 110), Box(500, 100, 510, 110)]


def test_groups_report_members():
    groups = cluster_groups([Box(0, 200, 48, 220), Box(52, 0, 100, 20), Box(0, 0, 48, 20)])
    assert groups == [(Box(0, 0, 100, 20), (1, 2)), (Box(0, 200, 48, 220), (0,))]


def test_thresholds_are_configurable():
    frags = [Box(0, 0, 48, 20), Box(52, 0, 100, 20)]
    strict = ClusterParams(line_h_gap_max=0.1)
    assert len(cluster_boxes(frags, strict)) == 2


@pytest.mark.parametrize("kwargs", [{"line_v_overlap_min": 1.5}, {"para_h_overlap_min": -0.1}, {"para_v_gap_max": -1}])
def test_params_validated(kwargs):
    with pytest.raises(ValueError):
        ClusterParams(**kwargs)


box_lists = st.lists(boxes(extent=200, side=40), max_size=8)


@settings(max_examples=300, deadline=None)
@given(box_lists)
def test_cluster_idempotent(bs):
    once = cluster_boxes(bs)
    assert cluster_boxes(once) == once


@settings(max_examples=300, deadline=None)
@given(box_lists)
def test_every_input_in_exactly_one_hull(bs):
    out = cluster_boxes(bs)
    for b in bs:
        assert sum(h.contains(b) for h in out) == 1


@settings(max_examples=200, deadline=None)
@given(box_lists, st.integers(-50, 50), st.integers(-50, 50))
def test_translation_equivariance(bs, dx, dy):
    dx, dy = dx + 100, dy + 100  # keep coordinates non-negative
    moved_then_clustered = cluster_boxes([b.translate(dx, dy) for b in bs])
    clustered_then_moved = [b.translate(dx, dy) for b in cluster_boxes(bs)]
    assert moved_then_clustered == clustered_then_moved
