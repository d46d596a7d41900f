"""Unified page model: an ordered sequence of (box, category, text) blocks.

The block order of a page *is* its reading order. Nothing in this module sorts
blocks geometrically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

DEFAULT_CATEGORIES: tuple[str, ...] = (
    "title",
    "section-header",
    "text",
    "list-item",
    "table",
    "figure",
    "caption",
    "formula",
    "page-header",
    "page-footer",
    "footnote",
)

TEXT_CATEGORIES = frozenset(
    {
        "title",
        "section-header",
        "text",
        "list-item",
        "caption",
        "footnote",
        "page-header",
        "page-footer",
    }
)
FORMULA_CATEGORY = "formula"
TABLE_CATEGORY = "table"
FIGURE_CATEGORY = "figure"


class AnnotationError(ValueError):
    """Raised when an annotation file cannot be turned into a valid Page.

    ``line`` is set for JSON syntax errors, ``path`` for schema/invariant errors.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        super().__init__(message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    def translate(self, dx: float, dy: float) -> Box:
        return Box(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def contains(self, other: Box) -> bool:
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and other.x2 <= self.x2
            and other.y2 <= self.y2
        )


@dataclass(frozen=True)
class Block:
    box: Box
    category: str
    text: str = ""


@dataclass(frozen=True)
class Page:
    id: str
    width: float
    height: float
    blocks: tuple[Block, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        # accept any iterable but store a tuple so pages stay hashable/immutable
        if not isinstance(self.blocks, tuple):
            object.__setattr__(self, "blocks", tuple(self.blocks))

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class Violation:
    block_index: int | None
    rule: str
    message: str

    def __str__(self) -> str:
        return self.message


def box_violations(box: Box) -> list[str]:
    """Return human-readable reasons ``box`` breaks the Box invariants."""
    reasons = []
    coords = box.as_list()
    if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
        return ["coordinates must be finite numbers"]
    if any(c < 0 for c in coords):
        reasons.append("negative coordinate")
    if box.x1 >= box.x2:
        reasons.append("x1 >= x2")
    if box.y1 >= box.y2:
        reasons.append("y1 >= y2")
    return reasons


def validate_page(
    page: Page,
    vocabulary: Iterable[str] = DEFAULT_CATEGORIES,
    *,
    check_tables: bool = True,
    table_grammar: str = "auto",
) -> list[Violation]:
    """List every invariant violation of ``page``; an empty list means valid."""
    from .tables import TableParseError, parse_table

    vocab = frozenset(vocabulary)
    out: list[Violation] = []
    if not (math.isfinite(page.width) and math.isfinite(page.height)) or page.width <= 0 or page.height <= 0:
        out.append(Violation(None, "page-size", "page width and height must be positive"))
    for i, block in enumerate(page.blocks):
        where = f"blocks[{i}]"
        if block.category not in vocab:
            out.append(
                Violation(i, "unknown-category", f"unknown category {block.category!r} at {where}.category")
            )
        reasons = box_violations(block.box)
        for reason in reasons:
            out.append(Violation(i, "box", f"box invariant violated at {where}: {reason}"))
        if not reasons and (block.box.x2 > page.width or block.box.y2 > page.height):
            out.append(
                Violation(
                    i,
                    "box-in-page",
                    f"box outside page at {where}.bbox: {block.box.as_list()} "
                    f"not within {page.width}x{page.height}",
                )
            )
        if check_tables and block.category == TABLE_CATEGORY:
            try:
                parse_table(block.text, table_grammar)
            except TableParseError as exc:
                out.append(Violation(i, "table-grammar", f"unparseable table at {where}.text: {exc}"))
    return out


def _expect(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise AnnotationError(f"{message} at {path}", path=path)


def _number(value: Any, path: str) -> float:
    _expect(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        "expected a number",
        path,
    )
    return float(value)


def page_from_dict(doc: Any) -> Page:
    """Build a Page from decoded JSON, checking only the file schema."""
    _expect(isinstance(doc, dict), "expected an object", "$")
    page_id = doc.get("id")
    _expect(isinstance(page_id, str), "expected a string", "id")
    dims = doc.get("page")
    _expect(isinstance(dims, dict), "expected an object", "page")
    width = _number(dims.get("width"), "page.width")
    height = _number(dims.get("height"), "page.height")
    raw_blocks = doc.get("blocks")
    _expect(isinstance(raw_blocks, list), "expected an array", "blocks")
    blocks = []
    for i, raw in enumerate(raw_blocks):
        where = f"blocks[{i}]"
        _expect(isinstance(raw, dict), "expected an object", where)
        bbox = raw.get("bbox")
        _expect(isinstance(bbox, list) and len(bbox) == 4, "expected [x1, y1, x2, y2]", f"{where}.bbox")
        coords = [_number(v, f"{where}.bbox[{j}]") for j, v in enumerate(bbox)]
        category = raw.get("category")
        _expect(isinstance(category, str), "expected a string", f"{where}.category")
        text = raw.get("text", "")
        _expect(isinstance(text, str), "expected a string", f"{where}.text")
        blocks.append(Block(Box(*coords), category, text))
    return Page(page_id, width, height, tuple(blocks))


def load_page_unchecked(raw: bytes | str) -> Page:
    """Decode an annotation file without checking page invariants."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AnnotationError(f"file is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"malformed JSON: {exc.msg}", line=exc.lineno) from exc
    return page_from_dict(doc)


def parse_page(
    raw: bytes | str,
    vocabulary: Iterable[str] = DEFAULT_CATEGORIES,
    *,
    check_tables: bool = True,
    table_grammar: str = "auto",
) -> Page:
    """Parse and validate one annotation file.

    Block order is preserved exactly. Raises AnnotationError naming the block
    index and field of the first problem found.
    """
    page = load_page_unchecked(raw)
    problems = validate_page(page, vocabulary, check_tables=check_tables, table_grammar=table_grammar)
    if problems:
        first = problems[0]
        path = f"blocks[{first.block_index}]" if first.block_index is not None else "page"
        raise AnnotationError(first.message, path=path)
    return page


def _num_out(x: float) -> int | float:
    x = float(x)
    return int(x) if x.is_integer() else x


def page_to_dict(page: Page) -> dict[str, Any]:
    return {
        "id": page.id,
        "page": {"width": _num_out(page.width), "height": _num_out(page.height)},
        "blocks": [
            {
                "bbox": [_num_out(c) for c in b.box.as_list()],
                "category": b.category,
                "text": b.text,
            }
            for b in page.blocks
        ],
    }


def serialize_page(page: Page) -> bytes:
    """Canonical UTF-8 JSON: sorted keys, integral numbers written as integers."""
    text = json.dumps(page_to_dict(page), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")
