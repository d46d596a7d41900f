"""Exhaustive reference implementations for small inputs.

These are deliberately naive and share no search logic with the production
matcher or tree-distance code; they exist to check them.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from typing import Sequence

from .geometry import iou
from .matching import MatchResult
from .model import Box
from .tables import TableNode, relabel_cost

MAX_MATCH_SIDE = 8
MAX_TREE_NODES = 6


def brute_force_from_matrix(matrix: Sequence[Sequence[float]], n_pred: int, n_gt: int) -> MatchResult:
    if n_pred > MAX_MATCH_SIDE or n_gt > MAX_MATCH_SIDE:
        raise ValueError(f"brute force is limited to {MAX_MATCH_SIDE} boxes per side")
    exact = [[Fraction(v) for v in row] for row in matrix]
    best_key = None
    best_pairs: list[tuple[int, int]] = []
    # Enumerate every maximal injective assignment; IoUs are non-negative so
    # only maximal ones can be optimal.
    if n_pred <= n_gt:
        candidates = (list(enumerate(cols)) for cols in permutations(range(n_gt), n_pred))
    else:
        candidates = ([(r, c) for c, r in enumerate(rows)] for rows in permutations(range(n_pred), n_gt))
    for assignment in candidates:
        pairs = sorted((i, j) for i, j in assignment if exact[i][j] > 0)
        total = sum((exact[i][j] for i, j in pairs), Fraction(0))
        key = (-total, pairs)
        if best_key is None or key < best_key:
            best_key = key
            best_pairs = pairs
    matched_p = {i for i, _ in best_pairs}
    matched_g = {j for _, j in best_pairs}
    return MatchResult(
        pairs=tuple((i, j, matrix[i][j]) for i, j in best_pairs),
        unmatched_pred=frozenset(range(n_pred)) - matched_p,
        unmatched_gt=frozenset(range(n_gt)) - matched_g,
    )


def brute_force_match(preds: Sequence[Box], gts: Sequence[Box]) -> MatchResult:
    """Best one-to-one assignment by enumerating all of them (<= 8 per side)."""
    matrix = [[iou(p, g) for g in gts] for p in preds]
    return brute_force_from_matrix(matrix, len(preds), len(gts))


def _indexed(tree: TableNode):
    """Nodes in preorder with their postorder rank."""
    pre: list[TableNode] = []
    post_rank: dict[int, int] = {}
    counter = [0]

    def walk(node: TableNode) -> None:
        k = len(pre)
        pre.append(node)
        for c in node.children:
            walk(c)
        post_rank[k] = counter[0]
        counter[0] += 1

    walk(tree)
    return pre, [post_rank[k] for k in range(len(pre))]


def naive_ted(a: TableNode, b: TableNode, max_nodes: int = MAX_TREE_NODES) -> Fraction:
    """Tree edit distance by enumerating every valid node mapping.

    A mapping is valid when it is one-to-one and preserves both preorder and
    postorder (hence ancestry and sibling order). Cost = relabels of mapped
    pairs + one per unmapped node on either side. Exact (Fraction) result.
    """
    a_pre, a_post = _indexed(a)
    b_pre, b_post = _indexed(b)
    if len(a_pre) > max_nodes or len(b_pre) > max_nodes:
        raise ValueError(f"naive_ted is limited to {max_nodes} nodes per tree")
    na, nb = len(a_pre), len(b_pre)
    cost = [[Fraction(relabel_cost(x, y, exact=True)) for y in b_pre] for x in a_pre]
    best = Fraction(na + nb)

    def search(i: int, used: frozenset[int], mapped: list[tuple[int, int]], acc: Fraction) -> None:
        nonlocal best
        if i == na:
            total = acc + (na - len(mapped)) + (nb - len(mapped))
            if total < best:
                best = total
            return
        search(i + 1, used, mapped, acc)  # node i left unmapped
        for j in range(nb):
            if j in used:
                continue
            ok = all(
                (i > pi) == (j > pj) and (a_post[i] > a_post[pi]) == (b_post[j] > b_post[pj])
                for pi, pj in mapped
            )
            if ok:
                mapped.append((i, j))
                search(i + 1, used | {j}, mapped, acc + cost[i][j])
                mapped.pop()

    search(0, frozenset(), [], Fraction(0))
    return best
