"""Random small instances for the oracle suites."""

from __future__ import annotations

import random

from .model import Box
from .tables import CELL, ROW, TABLE, TableNode

_TEXTS = ("", "a", "b", "ab", "ac", "abc", "ba")


def random_box(rng: random.Random, extent: int = 20, max_side: int = 10) -> Box:
    # a coarse integer grid makes overlaps (and exact IoU ties) common
    x1, y1 = rng.randint(0, extent), rng.randint(0, extent)
    return Box(x1, y1, x1 + rng.randint(1, max_side), y1 + rng.randint(1, max_side))


def box_instance(rng: random.Random, max_side: int = 6) -> tuple[list[Box], list[Box]]:
    preds = [random_box(rng) for _ in range(rng.randint(0, max_side))]
    gts = [random_box(rng) for _ in range(rng.randint(0, max_side))]
    if gts and rng.random() < 0.3:
        # duplicated boxes produce tied optima
        preds.append(rng.choice(gts))
        preds = preds[:max_side]
    return preds, gts


def random_node(rng: random.Random) -> TableNode:
    label = rng.choice((TABLE, ROW, CELL))
    if label == CELL:
        return TableNode(CELL, rng.choice(_TEXTS), rng.choice(((1, 1), (1, 1), (1, 2), (2, 1))))
    return TableNode(label)


def random_tree(rng: random.Random, max_nodes: int = 6) -> TableNode:
    """Arbitrary ordered labelled tree with 1..max_nodes nodes."""
    n = rng.randint(1, max_nodes)
    nodes = [random_node(rng) for _ in range(n)]
    children: list[list[int]] = [[] for _ in range(n)]
    for k in range(1, n):
        children[rng.randrange(k)].append(k)

    def build(k: int) -> TableNode:
        node = nodes[k]
        return TableNode(node.label, node.text, node.span, tuple(build(c) for c in children[k]))

    return build(0)


def random_table(rng: random.Random, max_nodes: int = 6) -> TableNode:
    """Well-formed table tree (table -> rows -> cells) with at most max_nodes nodes."""
    budget = rng.randint(1, max_nodes) - 1
    rows = []
    while budget > 0:
        n_cells = rng.randint(0, budget - 1)
        rows.append(
            TableNode(
                ROW,
                children=tuple(
                    TableNode(CELL, rng.choice(_TEXTS), rng.choice(((1, 1), (1, 2)))) for _ in range(n_cells)
                ),
            )
        )
        budget -= 1 + n_cells
    return TableNode(TABLE, children=tuple(rows))


def tree_pair(rng: random.Random, max_nodes: int = 6) -> tuple[TableNode, TableNode]:
    make = random_table if rng.random() < 0.5 else random_tree
    return make(rng, max_nodes), make(rng, max_nodes)
