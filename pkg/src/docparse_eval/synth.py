"""Seeded synthetic pages and perturbations whose metric outcome is known.

Generated pages stack blocks in columns with generous gaps (>= 50 px between
blocks, heights 20-60 px), so that under the default clustering thresholds no
two distinct blocks can ever be merged. That spacing is what lets ``perturb``
state the exact detection tally and edit scores a correct evaluator must
return, without running the evaluator.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from .geometry import iou
from .matching import DetectionTally
from .model import (
    FIGURE_CATEGORY,
    FORMULA_CATEGORY,
    TABLE_CATEGORY,
    TEXT_CATEGORIES,
    Block,
    Box,
    Page,
)
from .seqmetrics import EditScore, levenshtein, normalize_whitespace
from .tables import cell, make_table, parse_table, to_html, to_latex

PAGE_WIDTH = 1000
PAGE_HEIGHT = 1400
MARGIN = 50
GUTTER = 60
MIN_VGAP, MAX_VGAP = 50, 70
MIN_HEIGHT, MAX_HEIGHT = 20, 60
FRAGMENT_GAP = 4
MAX_SAFE_JITTER = 20
JITTER_MIN_IOU = 0.75
# never produced by the word lists, so each noisy character costs exactly one edit
NOISE_CHAR = "¤"

WORDS = {
    "en": (
        "the model reads each page in order and returns layout blocks with text "
        "table figure caption results method data value score annual report section "
        "overview analysis revenue growth market region total summary chapter notes"
    ).split(),
    "zh": "文档 解析 模型 表格 图像 标题 段落 公式 阅读 顺序 布局 检测 文本 识别 结果 方法 数据 分析 报告 总结".split(),
    "de": (
        "das modell liest jede seite und liefert blöcke mit text tabelle abbildung "
        "ergebnis methode daten wert bericht abschnitt übersicht umsatz wachstum markt"
    ).split(),
    "fr": (
        "le modèle lit chaque page et renvoie des blocs avec texte tableau figure "
        "résultat méthode données valeur rapport section aperçu croissance marché"
    ).split(),
}
FORMULA_TOKENS = ("x", "y", "z", "a_{1}", "b^{2}", "+", "-", "=", "\\alpha", "\\sum_{i}", "(", ")", "2")

_NON_TABLE = (
    "title",
    "section-header",
    "text",
    "list-item",
    "figure",
    "caption",
    "formula",
    "page-header",
    "page-footer",
    "footnote",
)
_NON_TABLE_WEIGHTS = (1, 2, 8, 3, 1, 1, 2, 1, 1, 1)


@dataclass(frozen=True)
class Strata:
    columns: int = 1
    table_density: float = 0.1
    language: str = "en"
    n_blocks: int | None = None


def _words(rng: random.Random, language: str, lo: int, hi: int) -> str:
    vocab = WORDS[language]
    return " ".join(rng.choice(vocab) for _ in range(rng.randint(lo, hi)))


def _table_text(rng: random.Random, language: str) -> str:
    n_rows, n_cols = rng.randint(1, 3), rng.randint(1, 3)
    rows = []
    for _ in range(n_rows):
        row, used = [], 0
        while used < n_cols:
            span = 2 if n_cols - used >= 2 and rng.random() < 0.2 else 1
            row.append(cell(_words(rng, language, 0, 2), 1, span))
            used += span
        rows.append(row)
    tree = make_table(rows)
    return to_latex(tree) if rng.random() < 0.5 else to_html(tree)


def _block_text(rng: random.Random, category: str, language: str) -> str:
    if category == FIGURE_CATEGORY:
        return ""
    if category == TABLE_CATEGORY:
        return _table_text(rng, language)
    if category == FORMULA_CATEGORY:
        return " ".join(rng.choice(FORMULA_TOKENS) for _ in range(rng.randint(3, 9)))
    if category in ("title", "section-header", "page-header", "page-footer"):
        return _words(rng, language, 1, 5)
    return _words(rng, language, 3, 24)


def generate_layout(seed: int, strata: Strata | None = None, page_id: str | None = None) -> tuple[Page, list[int]]:
    """Generate a page plus the column each block was placed in."""
    strata = strata or Strata()
    if strata.columns < 1 or not 0.0 <= strata.table_density <= 1.0 or strata.language not in WORDS:
        raise ValueError(f"invalid strata {strata}")
    rng = random.Random(seed)
    n = strata.n_blocks if strata.n_blocks is not None else rng.randint(2, 8) * strata.columns
    col_w = (PAGE_WIDTH - 2 * MARGIN - (strata.columns - 1) * GUTTER) / strata.columns
    if col_w < 40:
        raise ValueError(f"{strata.columns} columns do not fit on a {PAGE_WIDTH}px page")
    per_col = [n // strata.columns + (1 if c < n % strata.columns else 0) for c in range(strata.columns)]

    blocks: list[Block] = []
    columns: list[int] = []
    for c, count in enumerate(per_col):
        x0 = MARGIN + c * (col_w + GUTTER)
        y = MARGIN
        for _ in range(count):
            h = rng.randint(MIN_HEIGHT, MAX_HEIGHT)
            if y + h > PAGE_HEIGHT - MARGIN:
                raise ValueError(f"{n} blocks in {strata.columns} column(s) do not fit on the page")
            w = max(40, int(col_w * rng.uniform(0.6, 1.0)))
            if rng.random() < strata.table_density:
                category = TABLE_CATEGORY
            else:
                category = rng.choices(_NON_TABLE, _NON_TABLE_WEIGHTS)[0]
            x1 = int(x0)
            blocks.append(Block(Box(x1, y, x1 + w, y + h), category, _block_text(rng, category, strata.language)))
            columns.append(c)
            y += h + rng.randint(MIN_VGAP, MAX_VGAP)
    return Page(page_id or f"synth-{seed}", PAGE_WIDTH, PAGE_HEIGHT, tuple(blocks)), columns


def generate_page(seed: int, strata: Strata | None = None, page_id: str | None = None) -> Page:
    return generate_layout(seed, strata, page_id)[0]


# --- perturbation --------------------------------------------------------------


@dataclass(frozen=True)
class PerturbSpec:
    split_prob: float = 0.0
    drop_prob: float = 0.0
    jitter_px: float = 0.0
    text_noise_rate: float = 0.0
    shuffle_order: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("split_prob", "drop_prob", "text_noise_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.jitter_px < 0:
            raise ValueError("jitter_px must be >= 0")


@dataclass(frozen=True)
class Expected:
    """Metric values forced by the construction of a perturbed page."""

    tally: DetectionTally
    per_category: dict[str, DetectionTally]
    text_edit: EditScore
    formula_edit: EditScore
    table_edit: EditScore
    reading_order_edit: EditScore
    teds_sum: float
    teds_count: int

    def to_dict(self) -> dict[str, Any]:
        def edit(e: EditScore) -> dict[str, Any]:
            return {"raw": e.raw_distance, "length": e.length, "normalized": e.normalized}

        return {
            "tally": list(self.tally.as_tuple()),
            "per_category": {k: list(v.as_tuple()) for k, v in sorted(self.per_category.items())},
            "text_edit": edit(self.text_edit),
            "formula_edit": edit(self.formula_edit),
            "table_edit": edit(self.table_edit),
            "reading_order_edit": edit(self.reading_order_edit),
            "teds_sum": self.teds_sum,
            "teds_count": self.teds_count,
        }


def split_box(box: Box, n: int, gap: float = FRAGMENT_GAP) -> list[Box]:
    """Cut ``box`` into ``n`` side-by-side fragments separated by ``gap``."""
    usable = box.width - gap * (n - 1)
    if n < 2 or usable <= n:
        raise ValueError(f"cannot split a {box.width}px box into {n} fragments")
    frag_w = usable / n
    out = []
    for k in range(n):
        x1 = box.x1 + k * (frag_w + gap)
        x2 = box.x2 if k == n - 1 else x1 + frag_w
        out.append(Box(x1, box.y1, x2, box.y2))
    return out


def _split_words(text: str, n: int) -> list[str]:
    words = text.split(" ") if text else []
    bounds = [round(k * len(words) / n) for k in range(n + 1)]
    return [" ".join(words[bounds[k] : bounds[k + 1]]) for k in range(n)]


def _jitter(rng: random.Random, box: Box, amount: float, page: Page) -> Box:
    amount = min(amount, MAX_SAFE_JITTER)
    if amount <= 0:
        return box
    d = [rng.uniform(-amount, amount) for _ in range(4)]
    moved = Box(box.x1 + d[0], box.y1 + d[1], box.x2 + d[2], box.y2 + d[3])
    valid = (
        0 <= moved.x1 < moved.x2 <= page.width
        and 0 <= moved.y1 < moved.y2 <= page.height
        and iou(moved, box) >= JITTER_MIN_IOU
    )
    return moved if valid else box


def _noisy(rng: random.Random, text: str, rate: float) -> str:
    if rate <= 0:
        return text
    return "".join(NOISE_CHAR if not ch.isspace() and rng.random() < rate else ch for ch in text)


def perturb_with_expectations(gt: Page, spec: PerturbSpec) -> tuple[Page, Expected]:
    """Degrade ``gt`` into a prediction and derive the exact expected metrics.

    Every block is independently dropped, split into 2-3 clusterable
    fragments (text blocks only), or jittered; text blocks may get character
    noise; the order of surviving blocks may be shuffled (a split block's
    fragments move together). Valid for pages laid out like
    ``generate_page`` output and IoU thresholds up to 0.5.
    """
    rng = random.Random(spec.seed)
    units: list[tuple[int, list[Block]]] = []
    per_category: dict[str, DetectionTally] = {}
    text = formula = table = EditScore(0, 0)
    teds_count = 0
    teds_sum = 0.0

    for k, block in enumerate(gt.blocks):
        cat = block.category
        dropped = rng.random() < spec.drop_prob
        split_roll = rng.random()
        n_frag = rng.randint(2, 3)
        prev = per_category.get(cat, DetectionTally())
        per_category[cat] = prev + (DetectionTally(fn=1) if dropped else DetectionTally(tp=1))
        gt_norm = normalize_whitespace(block.text)
        if dropped:
            if cat in TEXT_CATEGORIES:
                text += EditScore(len(gt_norm), len(gt_norm))
            elif cat == FORMULA_CATEGORY:
                formula += EditScore(len(gt_norm), len(gt_norm))
            elif cat == TABLE_CATEGORY:
                markup = to_html(parse_table(block.text))
                table += EditScore(len(markup), len(markup))
                teds_count += 1
            continue

        pred_text = _noisy(rng, block.text, spec.text_noise_rate) if cat in TEXT_CATEGORIES else block.text
        can_split = cat in TEXT_CATEGORIES and block.box.width > 4 * (FRAGMENT_GAP + 1)
        if can_split and split_roll < spec.split_prob:
            boxes = split_box(block.box, n_frag)
            pieces = [Block(b, cat, t) for b, t in zip(boxes, _split_words(pred_text, n_frag))]
        else:
            pieces = [Block(_jitter(rng, block.box, spec.jitter_px, gt), cat, pred_text)]
        units.append((k, pieces))

        if cat in TEXT_CATEGORIES:
            joined = normalize_whitespace(" ".join(p.text for p in pieces))
            text += EditScore(levenshtein(gt_norm, joined), max(len(gt_norm), len(joined)))
        elif cat == FORMULA_CATEGORY:
            formula += EditScore(0, len(gt_norm))
        elif cat == TABLE_CATEGORY:
            table += EditScore(0, len(to_html(parse_table(block.text))))
            teds_sum += 1.0
            teds_count += 1

    if spec.shuffle_order and len(units) >= 2:
        original = list(units)
        for _ in range(16):
            rng.shuffle(units)
            if units != original:
                break
        else:
            units = original[1:] + original[:1]

    hyp = [k for k, _ in units]
    n_dropped = len(gt.blocks) - len(units)
    order = EditScore(levenshtein(hyp, sorted(hyp)) + n_dropped, len(gt.blocks))
    pred = Page(gt.id, gt.width, gt.height, tuple(b for _, pieces in units for b in pieces))
    tally = sum(per_category.values(), DetectionTally())
    return pred, Expected(tally, per_category, text, formula, table, order, teds_sum, teds_count)


def perturb(gt: Page, spec: PerturbSpec) -> tuple[Page, DetectionTally]:
    pred, expected = perturb_with_expectations(gt, spec)
    return pred, expected.tally


def mixture_specs(seed: int, count: int) -> list[PerturbSpec]:
    """Seeded random PerturbSpecs covering all perturbation kinds at once."""
    rng = random.Random(seed)
    return [
        PerturbSpec(
            split_prob=round(rng.random(), 3),
            drop_prob=round(rng.uniform(0, 0.6), 3),
            jitter_px=rng.choice((0, 1, 3, 5, 10)),
            text_noise_rate=round(rng.uniform(0, 0.3), 3),
            shuffle_order=rng.random() < 0.5,
            seed=rng.randrange(2**31),
        )
        for _ in range(count)
    ]


@dataclass
class SynthCorpus:
    pages: list[tuple[Page, Page, Expected]] = field(default_factory=list)
    groups: dict[str, str] = field(default_factory=dict)


def synth_corpus(
    seed: int,
    n_pages: int,
    spec: PerturbSpec | None = None,
    strata: Sequence[Strata] | None = None,
) -> SynthCorpus:
    """Paired GT/prediction pages cycling through ``strata``.

    Page k uses seed ``seed * 100_003 + k`` for layout and ``spec`` with its
    seed offset by k for perturbation.
    """
    spec = spec or PerturbSpec()
    strata = list(strata or [Strata(1, 0.1, "en"), Strata(2, 0.2, "zh"), Strata(1, 0.3, "de"), Strata(3, 0.1, "fr")])
    corpus = SynthCorpus()
    for k in range(n_pages):
        st = strata[k % len(strata)]
        page_id = f"page-{seed}-{k:04d}"
        gt = generate_page(seed * 100_003 + k, st, page_id)
        page_spec = PerturbSpec(**{**asdict(spec), "seed": spec.seed * 100_003 + k})
        pred, expected = perturb_with_expectations(gt, page_spec)
        corpus.pages.append((gt, pred, expected))
        corpus.groups[page_id] = st.language
    return corpus
