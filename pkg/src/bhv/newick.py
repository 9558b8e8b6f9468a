"""Newick reading and writing.

Grammar accepted::

    tree    := subtree ';'
    subtree := leaf | '(' subtree (',' subtree)+ ')' [label] [':' length]

Leaves may carry ``:length``; labels may be single-quoted (``''`` escapes a
quote).  Internal node labels are read and discarded.  Rooted input is
unrooted by suppressing a degree-2 root, whose two edges are merged.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .core import Split, TaxonSet, Tree

DEFAULT_LENGTH = 1.0

_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_SPECIAL = set("()[]':;,\t\n\r ")


class NewickError(ValueError):
    """Syntax or consistency error, with the 0-based offset into the text."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        self.message = message
        super().__init__(f"{message} at offset {offset} (line {self.line}, column {self.column})")


@dataclass
class NewickDocument:
    taxa: TaxonSet
    trees: list[Tree] = field(default_factory=list)
    offsets: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i: int) -> Tree:
        return self.trees[i]


class _Node:
    __slots__ = ("children", "label", "length", "offset")

    def __init__(self, offset):
        self.children = []
        self.label = None
        self.length = None
        self.offset = offset


class _Parser:
    def __init__(self, text: str, start: int = 0):
        self.text = text
        self.pos = start

    def error(self, msg, pos=None):
        raise NewickError(msg, self.pos if pos is None else pos, self.text)

    def skip_ws(self):
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            if c.isspace():
                self.pos += 1
            elif c == "[":  # bracket comment
                end = text.find("]", self.pos)
                if end < 0:
                    self.error("unterminated comment")
                self.pos = end + 1
            else:
                break

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse_tree(self) -> _Node:
        node = self.parse_subtree(depth=0)
        if self.peek() != ";":
            if self.pos >= len(self.text):
                self.error("missing ';'")
            c = self.text[self.pos]
            self.error("unbalanced parentheses" if c == ")" else f"unexpected {c!r}")
        self.pos += 1
        return node

    def parse_subtree(self, depth) -> _Node:
        c = self.peek()
        node = _Node(self.pos)
        if c == "(":
            self.pos += 1
            while True:
                node.children.append(self.parse_subtree(depth + 1))
                c = self.peek()
                if c == ",":
                    self.pos += 1
                    continue
                if c == ")":
                    self.pos += 1
                    break
                if c in (";", ""):
                    self.error("unbalanced parentheses")
                self.error(f"unexpected {c!r}")
            if len(node.children) < 2:
                self.error("internal node with a single child", node.offset)
            node.label = self.parse_label(required=False)
        else:
            if c in ("", ";", ",", ")", ":"):
                self.error("missing leaf label")
            node.label = self.parse_label(required=True)
        if self.peek() == ":":
            self.pos += 1
            self.skip_ws()
            m = _NUMBER.match(self.text, self.pos)
            if not m:
                self.error("expected branch length")
            length = float(m.group(0))
            if length < 0:
                self.error("negative branch length")
            node.length = length
            self.pos = m.end()
        return node

    def parse_label(self, required):
        c = self.peek()
        text = self.text
        if c == "'":
            out = []
            i = self.pos + 1
            while True:
                j = text.find("'", i)
                if j < 0:
                    self.error("unterminated quoted label")
                out.append(text[i:j])
                if text.startswith("''", j):
                    out.append("'")
                    i = j + 2
                else:
                    self.pos = j + 1
                    return "".join(out)
        start = self.pos
        while self.pos < len(text) and text[self.pos] not in _SPECIAL:
            self.pos += 1
        if self.pos == start:
            if required:
                self.error("missing leaf label")
            return None
        return text[start:self.pos]


def _to_tree(root: _Node, taxa: TaxonSet | None, text: str) -> tuple[Tree, TaxonSet]:
    # Unrooted adjacency: vertex -> list of (neighbour, length).
    adj: dict[int, dict[int, float]] = {}
    leaf_of: dict[int, str] = {}
    leaf_offset: dict[str, int] = {}
    counter = [0]

    def visit(node, parent):
        v = counter[0]
        counter[0] += 1
        adj[v] = {}
        if parent is not None:
            length = DEFAULT_LENGTH if node.length is None else node.length
            adj[v][parent] = length
            adj[parent][v] = length
        if node.children:
            for child in node.children:
                visit(child, v)
        else:
            if node.label in leaf_offset:
                raise NewickError(f"duplicate leaf label {node.label!r}", node.offset, text)
            leaf_of[v] = node.label
            leaf_offset[node.label] = node.offset
        return v

    stack_root = visit(root, None) if root.children else None
    if stack_root is None:
        raise NewickError("a tree needs at least two leaves", root.offset, text)

    # Suppress internal vertices of degree 2 (only the root can have one).
    for v in list(adj):
        if v not in leaf_of and len(adj[v]) == 2:
            (a, la), (b, lb) = adj[v].items()
            del adj[a][v], adj[b][v], adj[v]
            adj[a][b] = adj[b][a] = la + lb

    labels = [leaf_of[v] for v in sorted(leaf_of)]
    if taxa is None:
        taxa = TaxonSet(labels)
    elif set(labels) != set(taxa.labels):
        raise NewickError("leaf set differs from the first tree", root.offset, text)
    index = {leaf_of[v]: taxa.index(leaf_of[v]) for v in leaf_of}

    # Root at the vertex of leaf 0; every edge's far side avoids leaf 0.
    start = next(v for v, lab in leaf_of.items() if index[lab] == 0)
    pendant = [0.0] * taxa.n
    weights: dict[Split, float] = {}
    order, parent = [start], {start: None}
    for v in order:
        for u in adj[v]:
            if u not in parent:
                parent[u] = v
                order.append(u)
    below = {}
    for v in reversed(order):
        mask = (1 << index[leaf_of[v]]) if v in leaf_of and v != start else 0
        for u in adj[v]:
            if parent.get(u) == v:
                mask |= below[u]
        below[v] = mask
        p = parent[v]
        if p is None:
            continue
        length = adj[v][p]
        if v in leaf_of:
            pendant[index[leaf_of[v]]] = length
        elif p == start:
            pendant[0] = length
        else:
            weights[Split(mask, taxa)] = length
    return Tree(taxa, weights, pendant), taxa


def parse_newick(text: str, taxa: TaxonSet | None = None) -> NewickDocument:
    """Parse every ``;``-terminated tree in ``text``.

    All trees must share one leaf set; leaf order comes from the first tree
    unless ``taxa`` is given.
    """
    parser = _Parser(text)
    trees, offsets = [], []
    while parser.peek():
        offsets.append(parser.pos)
        root = parser.parse_tree()
        tree, taxa = _to_tree(root, taxa, text)
        trees.append(tree)
    if not trees:
        raise NewickError("no trees found", 0, text)
    return NewickDocument(taxa, trees, offsets)


def parse_tree(text: str, taxa: TaxonSet | None = None) -> Tree:
    doc = parse_newick(text, taxa)
    if len(doc) != 1:
        raise NewickError(f"expected one tree, found {len(doc)}", 0, text)
    return doc.trees[0]


def format_length(x: float, digits: int | None = None) -> str:
    """Shortest exact form, or ``digits`` significant digits when given."""
    if digits is not None:
        x = float(f"{x:.{digits}g}")
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def quote_label(label: str) -> str:
    if label and not any(c in _SPECIAL for c in label):
        return label
    return "'" + label.replace("'", "''") + "'"


def write_newick(T: Tree, digits: int | None = None) -> str:
    """Newick string for ``T``; degenerate trees become multifurcations.

    The string is rooted at the internal vertex adjacent to the last leaf, and
    children are listed by their smallest leaf index.
    """
    taxa = T.taxa
    n = taxa.n
    last = n - 1
    full = taxa.full_mask
    # clusters are the sides that avoid the last leaf
    clusters = {}
    for s, x in T.items():
        m = s.mask if not (s.mask >> last) & 1 else full & ~s.mask
        clusters[m] = x
    leaves = {1 << i: None for i in range(n) if i != last}
    nodes = sorted(list(clusters) + list(leaves), key=lambda m: bin(m).count("1"))
    children: dict[int, list[int]] = {m: [] for m in nodes}
    top = []
    for i, m in enumerate(nodes):
        for big in nodes[i + 1:]:
            if big in clusters and m & big == m and m != big:
                children[big].append(m)
                break
        else:
            top.append(m)

    def low(m):
        return (m & -m).bit_length() - 1

    def render(m):
        if m in leaves:
            i = low(m)
            return f"{quote_label(taxa.labels[i])}:{format_length(T.pendant[i], digits)}"
        kids = sorted(children[m], key=low)
        return "(" + ",".join(render(k) for k in kids) + f"):{format_length(clusters[m], digits)}"

    parts = [(low(m), render(m)) for m in top]
    parts.append((last, f"{quote_label(taxa.labels[last])}:{format_length(T.pendant[last], digits)}"))
    parts.sort()
    return "(" + ",".join(p for _, p in parts) + ");"
