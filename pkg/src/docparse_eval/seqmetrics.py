"""Edit-distance metrics for block text, formulas and reading order."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Hashable, Sequence

from rapidfuzz.distance import Levenshtein

from .model import Page

if TYPE_CHECKING:
    from .matching import MatchResult, TwoStageResult

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class EditScore:
    """Edit distance with its normalising length.

    ``length`` is the longer of the two compared sequences (summed when scores
    are pooled), so ``normalized == raw_distance / length`` with 0/0 taken as 0.
    """

    raw_distance: int
    length: int

    @property
    def normalized(self) -> float:
        return self.raw_distance / self.length if self.length else 0.0

    def __add__(self, other: EditScore) -> EditScore:
        return EditScore(self.raw_distance + other.raw_distance, self.length + other.length)


EMPTY_SCORE = EditScore(0, 0)


def normalize_whitespace(text: str) -> str:
    return _WS.sub(" ", text).strip()


def levenshtein(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Unit-cost insert/delete/substitute distance over code points or tokens."""
    return Levenshtein.distance(a, b)


def normalized_edit(a: Sequence[Hashable], b: Sequence[Hashable]) -> EditScore:
    return EditScore(levenshtein(a, b), max(len(a), len(b)))


def text_edit(gt: str, pred: str) -> EditScore:
    """``normalized_edit`` after collapsing whitespace runs and trimming."""
    return normalized_edit(normalize_whitespace(gt), normalize_whitespace(pred))


def order_edit(n_gt: int, pred_order: Sequence[Sequence[int]]) -> EditScore:
    """Score how far the predicted block order is from the ground-truth order.

    ``pred_order`` lists, in predicted reading order, the GT indices each
    matched prediction (or prediction group) was paired with. Matched GT
    indices are compared against their ascending order; every GT block that
    never appears costs one extra deletion. The score is normalised by the
    number of GT blocks.
    """
    hyp: list[int] = []
    seen: set[int] = set()
    for group in pred_order:
        for j in sorted(group):
            if not 0 <= j < n_gt:
                raise IndexError(f"GT index {j} out of range for {n_gt} blocks")
            if j in seen:
                raise ValueError(f"GT index {j} paired more than once")
            seen.add(j)
            hyp.append(j)
    raw = levenshtein(hyp, sorted(hyp)) + (n_gt - len(hyp))
    return EditScore(raw, n_gt)


def reading_order_edit(gt: Page, pred: Page, pairing: MatchResult | TwoStageResult) -> EditScore:
    """Reading-order edit of ``pred`` against ``gt`` under a block pairing.

    ``pairing`` is either a one-to-one MatchResult or the grouped pairing of the
    two-stage matcher; groups are placed at their first predicted block.
    """
    groups: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for pair in pairing.pairs:
        if isinstance(pair, tuple):
            groups.append(((pair[0],), (pair[1],)))
        else:
            groups.append((tuple(pair.pred), tuple(pair.gt)))
    for preds, _ in groups:
        for i in preds:
            if not 0 <= i < len(pred.blocks):
                raise IndexError(f"pred index {i} out of range for {len(pred.blocks)} blocks")
    groups.sort(key=lambda g: min(g[0]))
    return order_edit(len(gt.blocks), [g for _, g in groups])
