"""Corpus evaluation: per-page metrics, aggregation and report rendering."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .geometry import ClusterParams
from .matching import DetectionScore, DetectionTally, EvalMode, TwoStageResult, two_stage_match
from .model import (
    DEFAULT_CATEGORIES,
    FORMULA_CATEGORY,
    TABLE_CATEGORY,
    TEXT_CATEGORIES,
    AnnotationError,
    Page,
    parse_page,
)
from .seqmetrics import EMPTY_SCORE, EditScore, normalize_whitespace, normalized_edit, reading_order_edit, text_edit
from .tables import TableParseError, concat_tables, parse_table, teds, to_html

log = logging.getLogger(__name__)

EDIT_COMPONENTS = ("text_edit", "formula_edit", "table_edit", "reading_order_edit")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    tau: float = 0.5
    mode: EvalMode = EvalMode.CATEGORY_AWARE
    cluster: ClusterParams = field(default_factory=ClusterParams)
    categories: tuple[str, ...] = DEFAULT_CATEGORIES
    table_grammar: str = "auto"
    workers: int = 1
    report_format: str = "json"
    # weights of text, formula, table and reading-order edits in OverallEdit
    overall_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    page_average: bool = False

    def __post_init__(self) -> None:
        if not (isinstance(self.tau, (int, float)) and 0.0 < self.tau <= 1.0):
            raise ConfigError(f"IoU threshold must lie in (0, 1], got {self.tau!r}")
        try:
            object.__setattr__(self, "mode", EvalMode.parse(self.mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.table_grammar not in ("auto", "html", "latex"):
            raise ConfigError(f"unknown table grammar {self.table_grammar!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.report_format not in ("json", "markdown"):
            raise ConfigError(f"unknown report format {self.report_format!r}")
        if len(self.overall_weights) != 4 or any(w < 0 for w in self.overall_weights) or not sum(self.overall_weights):
            raise ConfigError("overall_weights needs four non-negative weights with a positive sum")
        if len(set(self.categories)) != len(self.categories) or not self.categories:
            raise ConfigError("category vocabulary must be a non-empty list of distinct names")

    def describe(self) -> dict[str, Any]:
        return {
            "iou_threshold": self.tau,
            "mode": self.mode.value,
            "cluster": {
                "line_v_overlap_min": self.cluster.line_v_overlap_min,
                "line_h_gap_max": self.cluster.line_h_gap_max,
                "para_h_overlap_min": self.cluster.para_h_overlap_min,
                "para_v_gap_max": self.cluster.para_v_gap_max,
            },
            "table_grammar": self.table_grammar,
            "overall_weights": list(self.overall_weights),
            "averaging": "page" if self.page_average else "length-weighted",
        }


@dataclass(frozen=True)
class DocumentReport:
    id: str
    detection: DetectionScore
    per_category: Mapping[str, DetectionTally]
    text_edit: EditScore
    formula_edit: EditScore
    table_edit: EditScore
    reading_order_edit: EditScore
    teds_sum: float = 0.0
    teds_count: int = 0
    diagnostics: tuple[str, ...] = ()

    @property
    def table_teds(self) -> float | None:
        return self.teds_sum / self.teds_count if self.teds_count else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "detection": _score_dict(self.detection),
            "per_category": {k: _score_dict(DetectionScore.from_tally(v)) for k, v in sorted(self.per_category.items())},
            **{name: _edit_dict(getattr(self, name)) for name in EDIT_COMPONENTS},
            "table_teds": self.table_teds,
            "table_count": self.teds_count,
            "diagnostics": list(self.diagnostics),
        }


def _score_dict(s: DetectionScore) -> dict[str, Any]:
    return {
        "tp": s.tally.tp,
        "fp": s.tally.fp,
        "fn": s.tally.fn,
        "precision": s.precision,
        "recall": s.recall,
        "f1": s.f1,
    }


def _edit_dict(e: EditScore) -> dict[str, Any]:
    return {"raw": e.raw_distance, "length": e.length, "normalized": e.normalized}


def _joined(page: Page, indices: Iterable[int]) -> str:
    return normalize_whitespace(" ".join(page.blocks[i].text for i in sorted(indices)))


def _full_loss(text: str) -> EditScore:
    n = len(text)
    return EditScore(n, n)


def _table_markup(text: str, grammar: str) -> tuple[str, bool]:
    try:
        return to_html(parse_table(text, grammar)), True
    except TableParseError:
        return normalize_whitespace(text), False


def evaluate_document(gt: Page, pred: Page, cfg: EvalConfig | None = None) -> DocumentReport:
    """Score one predicted page against its ground truth.

    The category-aware two-stage pairing drives every content metric. Matched
    groups compare their concatenated texts; unmatched blocks on either side
    count as total loss. Unmatched GT tables score TEDS 0.
    """
    cfg = cfg or EvalConfig()
    det = two_stage_match(pred.blocks, gt.blocks, cfg.tau, cfg.mode, cfg.cluster)
    if cfg.mode is EvalMode.CATEGORY_AWARE:
        pairing: TwoStageResult = det
    else:
        pairing = two_stage_match(pred.blocks, gt.blocks, cfg.tau, EvalMode.CATEGORY_AWARE, cfg.cluster)

    text, formula, table = EMPTY_SCORE, EMPTY_SCORE, EMPTY_SCORE
    teds_sum, teds_count = 0.0, 0
    notes: list[str] = []

    for group in pairing.pairs:
        category = gt.blocks[group.gt[0]].category
        if category in TEXT_CATEGORIES:
            text += text_edit(_joined(gt, group.gt), _joined(pred, group.pred))
        elif category == FORMULA_CATEGORY:
            formula += text_edit(_joined(gt, group.gt), _joined(pred, group.pred))
        elif category == TABLE_CATEGORY:
            gt_trees = [parse_table(gt.blocks[j].text, cfg.table_grammar) for j in group.gt]
            gt_tree = concat_tables(gt_trees)
            try:
                pred_tree = concat_tables([parse_table(pred.blocks[i].text, cfg.table_grammar) for i in group.pred])
            except TableParseError as exc:
                notes.append(f"unparseable predicted table at blocks{list(group.pred)}: {exc}")
                raw = _joined(pred, group.pred)
                n = max(len(to_html(gt_tree)), len(raw))
                table += EditScore(n, n)
                teds_count += len(group.gt)
                continue
            table += normalized_edit(to_html(gt_tree), to_html(pred_tree))
            teds_sum += teds(gt_tree, pred_tree) * len(group.gt)
            teds_count += len(group.gt)

    for j in sorted(pairing.unmatched_gt):
        block = gt.blocks[j]
        if block.category in TEXT_CATEGORIES:
            text += _full_loss(normalize_whitespace(block.text))
        elif block.category == FORMULA_CATEGORY:
            formula += _full_loss(normalize_whitespace(block.text))
        elif block.category == TABLE_CATEGORY:
            table += _full_loss(to_html(parse_table(block.text, cfg.table_grammar)))
            teds_count += 1

    for i in sorted(pairing.unmatched_pred):
        block = pred.blocks[i]
        if block.category in TEXT_CATEGORIES:
            text += _full_loss(normalize_whitespace(block.text))
        elif block.category == FORMULA_CATEGORY:
            formula += _full_loss(normalize_whitespace(block.text))
        elif block.category == TABLE_CATEGORY:
            markup, ok = _table_markup(block.text, cfg.table_grammar)
            if not ok:
                notes.append(f"unparseable predicted table at blocks[{i}]")
            table += _full_loss(markup)

    return DocumentReport(
        id=gt.id,
        detection=det.score,
        per_category=dict(det.per_category),
        text_edit=text,
        formula_edit=formula,
        table_edit=table,
        reading_order_edit=reading_order_edit(gt, pred, pairing),
        teds_sum=teds_sum,
        teds_count=teds_count,
        diagnostics=tuple(notes),
    )


# --- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class Totals:
    """Additive summary of any number of DocumentReports.

    ``+`` is associative and commutative on every integer field; float sums
    are accumulated in a fixed (id-sorted) order by ``aggregate``.
    """

    pages: int = 0
    tally: DetectionTally = DetectionTally()
    per_category: Mapping[str, DetectionTally] = field(default_factory=dict)
    edits: Mapping[str, EditScore] = field(default_factory=lambda: {k: EMPTY_SCORE for k in EDIT_COMPONENTS})
    teds_sum: float = 0.0
    teds_count: int = 0
    # page-averaging alternative: sum of per-page normalized values and page counts
    page_sums: Mapping[str, float] = field(default_factory=lambda: {k: 0.0 for k in (*EDIT_COMPONENTS, "table_teds")})
    page_counts: Mapping[str, int] = field(default_factory=lambda: {k: 0 for k in (*EDIT_COMPONENTS, "table_teds")})

    @classmethod
    def of(cls, report: DocumentReport) -> Totals:
        page_sums, page_counts = {}, {}
        for name in EDIT_COMPONENTS:
            e: EditScore = getattr(report, name)
            page_sums[name] = e.normalized if e.length else 0.0
            page_counts[name] = 1 if e.length else 0
        page_sums["table_teds"] = report.table_teds or 0.0
        page_counts["table_teds"] = 1 if report.teds_count else 0
        return cls(
            pages=1,
            tally=report.detection.tally,
            per_category=dict(report.per_category),
            edits={name: getattr(report, name) for name in EDIT_COMPONENTS},
            teds_sum=report.teds_sum,
            teds_count=report.teds_count,
            page_sums=page_sums,
            page_counts=page_counts,
        )

    def __add__(self, other: Totals) -> Totals:
        cats = dict(self.per_category)
        for k, v in other.per_category.items():
            cats[k] = cats.get(k, DetectionTally()) + v
        return Totals(
            pages=self.pages + other.pages,
            tally=self.tally + other.tally,
            per_category=cats,
            edits={k: self.edits[k] + other.edits[k] for k in EDIT_COMPONENTS},
            teds_sum=self.teds_sum + other.teds_sum,
            teds_count=self.teds_count + other.teds_count,
            page_sums={k: self.page_sums[k] + other.page_sums[k] for k in self.page_sums},
            page_counts={k: self.page_counts[k] + other.page_counts[k] for k in self.page_counts},
        )

    def summary(self, cfg: EvalConfig) -> dict[str, Any]:
        out: dict[str, Any] = {"pages": self.pages}
        for name in EDIT_COMPONENTS:
            if cfg.page_average:
                n = self.page_counts[name]
                out[name] = self.page_sums[name] / n if n else 0.0
            else:
                out[name] = self.edits[name].normalized
        if cfg.page_average:
            n = self.page_counts["table_teds"]
            out["table_teds"] = self.page_sums["table_teds"] / n if n else None
        else:
            out["table_teds"] = self.teds_sum / self.teds_count if self.teds_count else None
        weights = cfg.overall_weights
        out["overall_edit"] = sum(w * out[k] for w, k in zip(weights, EDIT_COMPONENTS)) / sum(weights)
        out["detection"] = _score_dict(DetectionScore.from_tally(self.tally))
        per_cat = {k: DetectionScore.from_tally(v) for k, v in sorted(self.per_category.items())}
        out["per_category"] = {k: _score_dict(v) for k, v in per_cat.items()}
        present = [v.f1 for k, v in per_cat.items() if v.tally.as_tuple() != (0, 0, 0)]
        out["macro_f1"] = sum(present) / len(present) if present else None
        return out


def totals_of(reports: Iterable[DocumentReport]) -> Totals:
    total = Totals()
    for r in sorted(reports, key=lambda r: r.id):
        total = total + Totals.of(r)
    return total


@dataclass(frozen=True)
class CorpusReport:
    empty: bool
    config: Mapping[str, Any]
    overall: Mapping[str, Any] | None
    groups: Mapping[str, Mapping[str, Any]]
    documents: Sequence[Mapping[str, Any]]
    totals: Totals = field(default_factory=Totals, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "empty": self.empty,
            "config": self.config,
            "overall": self.overall,
            "groups": self.groups,
            "documents": list(self.documents),
        }


def aggregate(
    reports: Sequence[DocumentReport],
    manifest: Mapping[str, str] | None = None,
    cfg: EvalConfig | None = None,
) -> CorpusReport:
    """Combine page reports into overall and per-group corpus figures.

    Edits are pooled by length (or averaged by page with ``page_average``);
    detection tallies are summed and scored once.
    """
    cfg = cfg or EvalConfig()
    ordered = sorted(reports, key=lambda r: r.id)
    ids = [r.id for r in ordered]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate page ids in corpus")
    if manifest is not None:
        missing = [i for i in ids if i not in manifest]
        if missing:
            raise ConfigError(f"manifest has no group for page ids: {', '.join(missing[:5])}")
    config = cfg.describe()
    if not ordered:
        return CorpusReport(empty=True, config=config, overall=None, groups={}, documents=[])

    overall = totals_of(ordered)
    groups: dict[str, Mapping[str, Any]] = {}
    if manifest is not None:
        by_group: dict[str, list[DocumentReport]] = {}
        for r in ordered:
            by_group.setdefault(manifest[r.id], []).append(r)
        groups = {g: totals_of(rs).summary(cfg) for g, rs in sorted(by_group.items())}
    documents = []
    for r in ordered:
        d = r.to_dict()
        if manifest is not None:
            d["group"] = manifest[r.id]
        documents.append(d)
    return CorpusReport(
        empty=False,
        config=config,
        overall=overall.summary(cfg),
        groups=groups,
        documents=documents,
        totals=overall,
    )


# --- rendering -----------------------------------------------------------------


def _fmt(x: float | None, digits: int = 3) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


def _fmt_teds(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.1f}"


def render_markdown(r: CorpusReport) -> str:
    lines = ["# Document parsing evaluation", ""]
    c = r.config
    cl = c["cluster"]
    lines.append(
        f"IoU threshold {c['iou_threshold']}, {c['mode']}, {c['averaging']} edits; "
        f"clustering: line v-overlap >= {cl['line_v_overlap_min']}, line h-gap <= {cl['line_h_gap_max']} x mean height, "
        f"paragraph h-overlap >= {cl['para_h_overlap_min']}, paragraph v-gap <= {cl['para_v_gap_max']} x mean height."
    )
    lines.append("")
    if r.empty:
        lines.append("**empty corpus**: no pages were evaluated.")
        return "\n".join(lines) + "\n"

    rows = [("all", r.overall)] + sorted(r.groups.items())
    lines.append(
        "| Group | Pages | OverallEdit↓ | TextEdit↓ | FormulaEdit↓ | TableTEDS↑ | TableEdit↓ | Reading Order Edit↓ |"
    )
    lines.append("|---|---:|---:|---:|---:|---:|---:|---:|")
    for name, s in rows:
        lines.append(
            f"| {name} | {s['pages']} | {_fmt(s['overall_edit'])} | {_fmt(s['text_edit'])} | "
            f"{_fmt(s['formula_edit'])} | {_fmt_teds(s['table_teds'])} | {_fmt(s['table_edit'])} | "
            f"{_fmt(s['reading_order_edit'])} |"
        )
    lines += ["", "## Layout detection", ""]
    lines.append("| Group | TP | FP | FN | Precision | Recall | F1 | Macro F1 |")
    lines.append("|---|---:|---:|---:|---:|---:|---:|---:|")
    for name, s in rows:
        d = s["detection"]
        lines.append(
            f"| {name} | {d['tp']} | {d['fp']} | {d['fn']} | {_fmt(d['precision'])} | "
            f"{_fmt(d['recall'])} | {_fmt(d['f1'])} | {_fmt(s['macro_f1'])} |"
        )
    lines += ["", "### Per category (all pages)", ""]
    lines.append("| Category | TP | FP | FN | Precision | Recall | F1 |")
    lines.append("|---|---:|---:|---:|---:|---:|---:|")
    for cat, d in r.overall["per_category"].items():
        lines.append(
            f"| {cat} | {d['tp']} | {d['fp']} | {d['fn']} | {_fmt(d['precision'])} | {_fmt(d['recall'])} | {_fmt(d['f1'])} |"
        )
    return "\n".join(lines) + "\n"


def render_report(r: CorpusReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        text = json.dumps(r.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    elif fmt == "markdown":
        text = render_markdown(r)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return text.encode("utf-8")


# --- corpus I/O ------------------------------------------------------------------


def load_page_file(path: Path, cfg: EvalConfig, *, check_tables: bool = True) -> Page:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FileNotFoundError(f"{path}: {exc.strerror}") from exc
    try:
        return parse_page(raw, cfg.categories, check_tables=check_tables, table_grammar=cfg.table_grammar)
    except AnnotationError as exc:
        raise AnnotationError(f"{path}: {exc}", path=exc.path, line=exc.line) from exc


def load_manifest(path: Path) -> dict[str, str]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed manifest JSON: {exc.msg}") from exc
    if not isinstance(data, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
        raise ConfigError(f"{path}: manifest must map page ids to group labels")
    return data


def _evaluate_pair(args: tuple[Page, Page, EvalConfig]) -> DocumentReport:
    gt, pred, cfg = args
    return evaluate_document(gt, pred, cfg)


def evaluate_pages(pairs: Sequence[tuple[Page, Page]], cfg: EvalConfig) -> list[DocumentReport]:
    jobs = [(gt, pred, cfg) for gt, pred in pairs]
    if cfg.workers == 1 or len(jobs) < 2:
        return [_evaluate_pair(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, os.cpu_count() or 1, len(jobs))) as pool:
        return list(pool.map(_evaluate_pair, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))


def load_corpus_pairs(gt_dir: Path, pred_dir: Path, cfg: EvalConfig) -> list[tuple[Page, Page]]:
    """Pair GT and prediction files by filename.

    A GT page without a prediction file is scored against an empty prediction.
    """
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"{d}: not a directory")
    pairs = []
    gt_files = sorted(gt_dir.glob("*.json"))
    gt_names = {p.name for p in gt_files}
    for extra in sorted(p.name for p in pred_dir.glob("*.json") if p.name not in gt_names):
        log.warning("prediction %s has no ground truth and is ignored", extra)
    for gt_path in gt_files:
        gt = load_page_file(gt_path, cfg)
        pred_path = pred_dir / gt_path.name
        if pred_path.exists():
            pred = load_page_file(pred_path, cfg, check_tables=False)
        else:
            log.warning("no prediction for %s; scoring an empty page", gt_path.name)
            pred = Page(gt.id, gt.width, gt.height, ())
        pairs.append((gt, pred))
    return pairs


def evaluate_corpus(
    gt_dir: Path, pred_dir: Path, cfg: EvalConfig | None = None, manifest: Mapping[str, str] | None = None
) -> CorpusReport:
    cfg = cfg or EvalConfig()
    pairs = load_corpus_pairs(Path(gt_dir), Path(pred_dir), cfg)
    return aggregate(evaluate_pages(pairs, cfg), manifest, cfg)


def with_overrides(cfg: EvalConfig, **changes: Any) -> EvalConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
