"""Table structure trees, their two interchange grammars, and TEDS.

A table is a rooted ordered tree ``table -> row* -> cell*``. Cells carry their
whitespace-normalised text and a (rowspan, colspan) pair. Trees can be read
from a strict HTML subset (table/tr/td) or from a restricted LaTeX tabular.
"""

from __future__ import annotations

import html
from dataclasses import dataclass
from fractions import Fraction
from html.parser import HTMLParser
from typing import Iterator

from .seqmetrics import levenshtein, normalize_whitespace

TABLE, ROW, CELL = "table", "row", "cell"


class TableParseError(ValueError):
    pass


@dataclass(frozen=True)
class TableNode:
    label: str
    text: str = ""
    span: tuple[int, int] = (1, 1)
    children: tuple[TableNode, ...] = ()

    def __len__(self) -> int:
        return 1 + sum(len(c) for c in self.children)

    def iter_preorder(self) -> Iterator[TableNode]:
        yield self
        for c in self.children:
            yield from c.iter_preorder()


def make_table(rows: list[list[TableNode]]) -> TableNode:
    return TableNode(TABLE, children=tuple(TableNode(ROW, children=tuple(r)) for r in rows))


def cell(text: str = "", rowspan: int = 1, colspan: int = 1) -> TableNode:
    return TableNode(CELL, normalize_whitespace(text), (rowspan, colspan))


def check_table_tree(tree: TableNode) -> None:
    """Raise TableParseError unless ``tree`` has the table -> row -> cell shape."""
    if tree.label != TABLE:
        raise TableParseError("root must be a table node")
    for row in tree.children:
        if row.label != ROW:
            raise TableParseError("table children must be rows")
        for c in row.children:
            if c.label != CELL or c.children:
                raise TableParseError("rows may only contain leaf cells")
            if c.span[0] < 1 or c.span[1] < 1:
                raise TableParseError(f"cell span must be >= (1, 1), got {c.span}")


# --- HTML subset -------------------------------------------------------------

_HTML_TAGS = {"table": TABLE, "tr": ROW, "td": CELL}


class _TableHTMLParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.stack: list[tuple[str, dict]] = []
        self.rows: list[list[TableNode]] | None = None
        self.cell_text: list[str] = []

    def error(self, message: str) -> None:
        raise TableParseError(message)

    def handle_starttag(self, tag, attrs):
        if tag not in _HTML_TAGS:
            self.error(f"element <{tag}> is outside the table/tr/td subset")
        parent = self.stack[-1][0] if self.stack else None
        expected_parent = {"table": None, "tr": "table", "td": "tr"}[tag]
        if tag == "table" and (parent is not None or self.rows is not None):
            self.error("nested or repeated <table> is not supported")
        if parent != expected_parent:
            self.error(f"<{tag}> cannot appear inside <{parent}>")
        spans = {"rowspan": 1, "colspan": 1}
        for name, value in attrs:
            if name in spans and tag == "td":
                try:
                    spans[name] = int(value)
                except (TypeError, ValueError):
                    self.error(f"{name}={value!r} is not an integer")
                if spans[name] < 1:
                    self.error(f"{name} must be >= 1")
        if tag == "table":
            self.rows = []
        elif tag == "tr":
            self.rows.append([])
        else:
            self.cell_text = []
        self.stack.append((tag, spans))

    def handle_startendtag(self, tag, attrs):
        self.error(f"self-closing <{tag}/> is not supported")

    def handle_endtag(self, tag):
        if not self.stack or self.stack[-1][0] != tag:
            open_tag = self.stack[-1][0] if self.stack else None
            self.error(f"</{tag}> does not close <{open_tag}>")
        _, spans = self.stack.pop()
        if tag == "td":
            self.rows[-1].append(cell("".join(self.cell_text), spans["rowspan"], spans["colspan"]))

    def handle_data(self, data):
        if self.stack and self.stack[-1][0] == "td":
            self.cell_text.append(data)
        elif data.strip():
            where = f"<{self.stack[-1][0]}>" if self.stack else "top level"
            self.error(f"stray text {data.strip()[:20]!r} at {where}")

    def handle_decl(self, decl):
        self.error("declarations are not supported")

    def unknown_decl(self, data):
        self.error("declarations are not supported")


def parse_table_html(text: str) -> TableNode:
    parser = _TableHTMLParser()
    parser.feed(text)
    parser.close()
    if parser.stack:
        raise TableParseError(f"unclosed <{parser.stack[-1][0]}>")
    if parser.rows is None:
        raise TableParseError("no <table> element found")
    return make_table(parser.rows)


def to_html(tree: TableNode) -> str:
    """Canonical HTML-subset markup of a table tree."""
    parts = ["<table>"]
    for row in tree.children:
        parts.append("<tr>")
        for c in row.children:
            attrs = ""
            if c.span[0] > 1:
                attrs += f' rowspan="{c.span[0]}"'
            if c.span[1] > 1:
                attrs += f' colspan="{c.span[1]}"'
            parts.append(f"<td{attrs}>{html.escape(c.text, quote=False)}</td>")
        parts.append("</tr>")
    parts.append("</table>")
    return "".join(parts)


# --- restricted LaTeX tabular ------------------------------------------------

_LATEX_ESCAPES = {"&", "%", "_", "#", "$", "{", "}"}
_LATEX_RULES = {"hline", "toprule", "midrule", "bottomrule"}
_BEGIN = "\\begin{tabular}"
_END = "\\end{tabular}"


class _LatexReader:
    def __init__(self, text: str) -> None:
        self.s = text
        self.i = 0

    def at_end(self) -> bool:
        return self.i >= len(self.s)

    def skip_ws(self) -> None:
        while not self.at_end() and self.s[self.i].isspace():
            self.i += 1

    def command(self) -> str:
        # positioned on a backslash
        j = self.i + 1
        if j < len(self.s) and not self.s[j].isalpha():
            self.i = j + 1
            return self.s[j]
        while j < len(self.s) and self.s[j].isalpha():
            j += 1
        name = self.s[self.i + 1 : j]
        self.i = j
        return name

    def group(self) -> str:
        """Raw contents of a balanced ``{...}`` group."""
        self.skip_ws()
        if self.at_end() or self.s[self.i] != "{":
            raise TableParseError(f"expected '{{' at offset {self.i}")
        depth = 0
        start = self.i + 1
        while not self.at_end():
            ch = self.s[self.i]
            if ch == "\\":
                self.i += 2
                continue
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    self.i += 1
                    return self.s[start : self.i - 1]
            self.i += 1
        raise TableParseError("unbalanced braces")


def _latex_text(raw: str) -> str:
    """Decode cell text: escapes become literals, bare braces are dropped."""
    out = []
    depth = 0
    r = _LatexReader(raw)
    while not r.at_end():
        ch = r.s[r.i]
        if ch == "\\":
            name = r.command()
            if name in _LATEX_ESCAPES:
                out.append(name)
            elif name == "\\":
                raise TableParseError("row break inside a cell group")
            elif name.isspace():
                out.append(" ")
            else:
                raise TableParseError(f"unsupported command \\{name}")
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise TableParseError("unbalanced braces")
        elif ch == "&":
            raise TableParseError("'&' inside a cell group")
        else:
            out.append(ch)
        r.i += 1
    if depth:
        raise TableParseError("unbalanced braces")
    return "".join(out)


def _split_top_level(body: str) -> list[list[str]]:
    """Split a tabular body into rows of raw cell strings at depth 0."""
    rows: list[list[str]] = [[]]
    buf: list[str] = []
    depth = 0
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if body.startswith("\\\\", i):
                if depth:
                    raise TableParseError("row break inside a brace group")
                rows[-1].append("".join(buf))
                buf = []
                rows.append([])
                i += 2
                # optional spacing argument, e.g. \\[2pt]
                if i < len(body) and body[i] == "[":
                    close = body.find("]", i)
                    if close < 0:
                        raise TableParseError("unterminated '[' after row break")
                    i = close + 1
                continue
            buf.append(body[i : i + 2])
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise TableParseError("unbalanced braces")
        elif ch == "&" and depth == 0:
            rows[-1].append("".join(buf))
            buf = []
            i += 1
            continue
        buf.append(ch)
        i += 1
    if depth:
        raise TableParseError("unbalanced braces")
    rows[-1].append("".join(buf))
    return rows


def _strip_rules(raw: str) -> str:
    r = _LatexReader(raw)
    out = []
    while not r.at_end():
        if r.s[r.i] == "\\":
            start = r.i
            name = r.command()
            if name in _LATEX_RULES:
                continue
            out.append(r.s[start : r.i])
            continue
        out.append(r.s[r.i])
        r.i += 1
    return "".join(out)


def _latex_cell(raw: str) -> TableNode:
    stripped = raw.strip()
    if stripped.startswith("\\multicolumn"):
        r = _LatexReader(stripped)
        r.i = len("\\multicolumn")
        n_raw = r.group()
        r.group()  # column spec, structure-irrelevant
        content = r.group()
        r.skip_ws()
        if not r.at_end():
            raise TableParseError("trailing content after \\multicolumn")
        try:
            n = int(n_raw.strip())
        except ValueError:
            raise TableParseError(f"\\multicolumn count {n_raw!r} is not an integer") from None
        if n < 1:
            raise TableParseError("\\multicolumn count must be >= 1")
        return cell(_latex_text(content), 1, n)
    return cell(_latex_text(stripped))


def parse_table_latex(text: str) -> TableNode:
    s = text.strip()
    if not s.startswith(_BEGIN):
        raise TableParseError("expected \\begin{tabular}")
    r = _LatexReader(s)
    r.i = len(_BEGIN)
    r.group()  # column spec is ignored for structure
    end = s.rfind(_END)
    if end < r.i:
        raise TableParseError("missing \\end{tabular}")
    if s[end + len(_END) :].strip():
        raise TableParseError("content after \\end{tabular}")
    body = s[r.i : end]
    if "\\begin" in body or "\\end" in body:
        raise TableParseError("nested environments are not supported")
    raw_rows = _split_top_level(body)
    rows: list[list[TableNode]] = []
    for k, raw_cells in enumerate(raw_rows):
        raw_cells = [_strip_rules(c) for c in raw_cells]
        if len(raw_cells) == 1 and not raw_cells[0].strip() and k == len(raw_rows) - 1:
            continue  # nothing after the final row break
        rows.append([_latex_cell(c) for c in raw_cells])
    return make_table(rows)


def _latex_escape(text: str) -> str:
    if "\\" in text:
        raise ValueError("backslash in cell text has no LaTeX encoding here")
    return "".join("\\" + ch if ch in _LATEX_ESCAPES else ch for ch in text)


def to_latex(tree: TableNode) -> str:
    ncols = max((sum(c.span[1] for c in row.children) for row in tree.children), default=1) or 1
    lines = [f"\\begin{{tabular}}{{{'c' * ncols}}}"]
    for row in tree.children:
        cells = []
        for c in row.children:
            if c.span[0] > 1:
                raise ValueError("row spans cannot be written in the LaTeX subset")
            body = _latex_escape(c.text)
            cells.append(f"\\multicolumn{{{c.span[1]}}}{{c}}{{{body}}}" if c.span[1] > 1 else body)
        lines.append(" & ".join(cells) + " \\\\")
    lines.append("\\end{tabular}")
    return "\n".join(lines)


def detect_grammar(text: str) -> str:
    s = text.lstrip()
    if s.startswith("<"):
        return "html"
    if s.startswith("\\begin"):
        return "latex"
    raise TableParseError("cannot tell table grammar from leading token")


def parse_table(text: str, grammar: str = "auto") -> TableNode:
    """Parse table markup; ``grammar`` is ``auto``, ``html`` or ``latex``."""
    if grammar == "auto":
        grammar = detect_grammar(text)
    if grammar == "html":
        return parse_table_html(text)
    if grammar == "latex":
        return parse_table_latex(text)
    raise ValueError(f"unknown table grammar {grammar!r}")


def concat_tables(trees: list[TableNode]) -> TableNode:
    """Stack several tables into one by concatenating their rows."""
    if len(trees) == 1:
        return trees[0]
    return TableNode(TABLE, children=tuple(row for t in trees for row in t.children))


# --- tree edit distance --------------------------------------------------------


def relabel_cost(a: TableNode, b: TableNode, exact: bool = False):
    if a.label != b.label or a.span != b.span:
        return 1
    if a.label == CELL and a.text != b.text:
        dist = levenshtein(a.text, b.text)
        longest = max(len(a.text), len(b.text))
        return Fraction(dist, longest) if exact else dist / longest
    return 0


def _postorder(tree: TableNode) -> tuple[list[TableNode], list[int]]:
    nodes: list[TableNode] = []
    lmd: list[int] = []

    def walk(node: TableNode) -> int:
        first = None
        for c in node.children:
            leftmost = walk(c)
            if first is None:
                first = leftmost
        nodes.append(node)
        idx = len(nodes) - 1
        lmd.append(idx if first is None else first)
        return lmd[idx]

    walk(tree)
    return nodes, lmd


def _keyroots(lmd: list[int]) -> list[int]:
    seen: dict[int, int] = {}
    for i, l in enumerate(lmd):
        seen[l] = i  # the highest node sharing a leftmost leaf
    return sorted(seen.values())


def ted(a: TableNode, b: TableNode, exact: bool = False):
    """Ordered tree edit distance (Zhang and Shasha).

    Insertions and deletions cost 1. Relabelling costs 1 when labels or spans
    differ; two same-span cells cost the normalised edit distance of their
    texts. With ``exact=True`` the result is a Fraction.
    """
    an, al = _postorder(a)
    bn, bl = _postorder(b)
    zero = Fraction(0) if exact else 0
    td = [[zero] * len(bn) for _ in range(len(an))]

    for i in _keyroots(al):
        for j in _keyroots(bl):
            li, lj = al[i], bl[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = [[zero] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, rows):
                ni = li + x - 1
                for y in range(1, cols):
                    nj = lj + y - 1
                    delete = fd[x - 1][y] + 1
                    insert = fd[x][y - 1] + 1
                    if al[ni] == li and bl[nj] == lj:
                        best = fd[x - 1][y - 1] + relabel_cost(an[ni], bn[nj], exact)
                        best = min(best, delete, insert)
                        fd[x][y] = best
                        td[ni][nj] = best
                    else:
                        px, py = al[ni] - li, bl[nj] - lj
                        fd[x][y] = min(delete, insert, fd[px][py] + td[ni][nj])
    return td[-1][-1]


def teds(a: TableNode, b: TableNode, exact: bool = False):
    """Tree-edit-distance similarity: ``1 - ted / max(|a|, |b|)``, floored at 0.

    The distance can exceed the larger tree size when the shapes disagree
    (a deep chain against a wide row), so the similarity is clamped.
    """
    size = max(len(a), len(b))
    dist = ted(a, b, exact)
    sim = 1 - (Fraction(dist) / size if exact else dist / size)
    return max(sim, Fraction(0) if exact else 0.0)
