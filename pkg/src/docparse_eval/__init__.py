"""Evaluation toolkit for document layout parsing output."""

from .geometry import ClusterParams, cluster_boxes, cluster_groups, iou
from .harness import CorpusReport, DocumentReport, EvalConfig, aggregate, evaluate_corpus, evaluate_document, render_report
from .matching import (
    DetectionScore,
    DetectionTally,
    EvalMode,
    MatchResult,
    optimal_bipartite_match,
    two_stage_f1,
    two_stage_match,
)
from .model import DEFAULT_CATEGORIES, AnnotationError, Block, Box, Page, parse_page, serialize_page, validate_page
from .seqmetrics import EditScore, levenshtein, normalized_edit, reading_order_edit
from .tables import TableNode, TableParseError, parse_table, parse_table_html, parse_table_latex, ted, teds

__all__ = [
    "AnnotationError",
    "Block",
    "Box",
    "ClusterParams",
    "CorpusReport",
    "DEFAULT_CATEGORIES",
    "DetectionScore",
    "DetectionTally",
    "DocumentReport",
    "EditScore",
    "EvalConfig",
    "EvalMode",
    "MatchResult",
    "Page",
    "TableNode",
    "TableParseError",
    "aggregate",
    "cluster_boxes",
    "cluster_groups",
    "evaluate_corpus",
    "evaluate_document",
    "iou",
    "levenshtein",
    "normalized_edit",
    "optimal_bipartite_match",
    "parse_page",
    "parse_table",
    "parse_table_html",
    "parse_table_latex",
    "reading_order_edit",
    "render_report",
    "serialize_page",
    "teds",
    "ted",
    "two_stage_f1",
    "two_stage_match",
    "validate_page",
]
