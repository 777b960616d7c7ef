"""Minimum spanning tree over a distance matrix, grouping scores, exports.

Kruskal with union-find. Edges are sorted by (weight, lexicographic min
symbol, lexicographic max symbol), so equal-weight ties resolve the same way
on every platform and the tree, and everything serialized from it, is
reproducible byte for byte.

Two grouping scores quantify how well the tree respects a sector or industry
labeling: the adjacency score is the fraction of tree edges joining
same-label nodes, and the subtree score is the fraction of label groups of
size >= 2 whose members induce a connected subtree. Singleton groups are
trivially connected and carry no grouping information, so they are excluded
from the subtree score; a labeling with no group of size >= 2 scores 1.0
vacuously.
"""
from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

from .errors import InsufficientDataError, ValidationError
from .metrics import DistanceMatrix, fmt_sig12

UNKNOWN_SECTOR = "UNKNOWN"

# Node fill colors by sector for DOT/GraphML/figure rendering; any sector not
# listed here falls back to gray.
SECTOR_COLORS = {
    "Basic Material": "yellow",
    "Conglomerates": "white",
    "Healthcare": "pink",
    "Transportations": "darkblue",
    "Technology": "red",
    "Capital Goods": "orange",
    "Utilities": "brown",
    "Consumer": "violet",
    "Financial": "green",
    "Energy": "gray",
    "Services": "lightblue",
}
UNKNOWN_COLOR = "gray"

EXPORT_FORMATS = ("dot", "graphml", "json")
LABEL_LEVELS = ("sector", "industry")


def color_for_sector(sector: str) -> str:
    return SECTOR_COLORS.get(sector, UNKNOWN_COLOR)


@dataclass(frozen=True)
class SectorLabeling:
    """Symbol -> (sector, industry). Symbols without an entry are UNKNOWN."""

    labels: dict[str, tuple[str, str]]

    def sector_of(self, symbol: str) -> str:
        return self.labels.get(symbol, (UNKNOWN_SECTOR, UNKNOWN_SECTOR))[0]

    def industry_of(self, symbol: str) -> str:
        return self.labels.get(symbol, (UNKNOWN_SECTOR, UNKNOWN_SECTOR))[1]

    def label_of(self, symbol: str, level: str) -> str:
        if level not in LABEL_LEVELS:
            raise ValidationError(f"unknown label level {level!r}, expected one of {LABEL_LEVELS}")
        return self.sector_of(symbol) if level == "sector" else self.industry_of(symbol)


EMPTY_LABELING = SectorLabeling({})


def read_labels_csv(path) -> SectorLabeling:
    """Parse a ``symbol,sector,industry`` CSV. Duplicate symbols are errors."""
    labels: dict[str, tuple[str, str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "symbol,sector,industry":
        raise ValidationError(f"{path}: expected header 'symbol,sector,industry'")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3 or not parts[0].strip():
            raise ValidationError(f"{path}:{lineno}: expected 'symbol,sector,industry'")
        sym = parts[0].strip()
        if sym in labels:
            raise ValidationError(f"{path}:{lineno}: duplicate symbol {sym!r}")
        labels[sym] = (parts[1].strip(), parts[2].strip())
    return SectorLabeling(labels)


@dataclass(frozen=True)
class TaxonomyTree:
    """Spanning tree: nodes carry (symbol, sector, industry), edges carry the
    distance they were selected at. Edge endpoints are stored min-first and
    edges sorted by (min, max); nodes sorted by symbol."""

    nodes: tuple[tuple[str, str, str], ...]
    edges: tuple[tuple[str, str, float], ...]

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes))
        edges = tuple(
            sorted((min(a, b), max(a, b), float(w)) for a, b, w in self.edges)
        )
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        syms = [n[0] for n in nodes]
        if len(set(syms)) != len(syms):
            raise ValidationError("duplicate symbols in tree nodes")
        if len(edges) != len(nodes) - 1:
            raise ValidationError(f"{len(nodes)} nodes need {len(nodes) - 1} edges, got {len(edges)}")
        symset = set(syms)
        for a, b, w in edges:
            if a not in symset or b not in symset:
                raise ValidationError(f"edge {a}-{b} references a missing node")
            if not (w >= 0.0):
                raise ValidationError(f"edge {a}-{b} has invalid weight {w}")
        # edge count N-1 plus full reachability implies acyclic
        adj = self.adjacency()
        seen = {syms[0]}
        stack = [syms[0]]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != symset:
            raise ValidationError("tree is not connected")

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(n[0] for n in self.nodes)

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n[0]: [] for n in self.nodes}
        for a, b, _ in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}
        self.rank = {x: 0 for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def minimum_spanning_tree(
    matrix: DistanceMatrix, labels: SectorLabeling = EMPTY_LABELING
) -> TaxonomyTree:
    """Kruskal's MST of the complete graph defined by ``matrix``.

    Missing (NaN) entries must be resolved upstream; they raise a validation
    error listing the offending pairs.
    """
    if matrix.n < 2:
        raise InsufficientDataError(f"need >= 2 symbols for a spanning tree, got {matrix.n}")
    missing = matrix.missing_pairs()
    if missing:
        pairs = ", ".join(f"{a}-{b}" for a, b in missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise ValidationError(f"distance matrix has missing entries: {pairs}{more}")
    syms = matrix.symbols
    # tie-break on (weight, min symbol, max symbol) regardless of matrix order
    edges = [
        (float(matrix.values[i, j]), min(syms[i], syms[j]), max(syms[i], syms[j]))
        for i in range(matrix.n)
        for j in range(i + 1, matrix.n)
    ]
    edges.sort()
    uf = _UnionFind(syms)
    chosen = []
    for w, a, b in edges:
        if uf.union(a, b):
            chosen.append((a, b, w))
            if len(chosen) == matrix.n - 1:
                break
    assert len(chosen) == matrix.n - 1
    root = uf.find(syms[0])
    assert all(uf.find(s) == root for s in syms)
    nodes = tuple((s, labels.sector_of(s), labels.industry_of(s)) for s in syms)
    return TaxonomyTree(nodes, tuple(chosen))


def sector_adjacency_score(tree: TaxonomyTree, labels: SectorLabeling, level: str = "sector") -> float:
    """Fraction of tree edges whose endpoints share the label at ``level``."""
    same = sum(1 for a, b, _ in tree.edges if labels.label_of(a, level) == labels.label_of(b, level))
    return same / len(tree.edges)


def sector_subtree_score(tree: TaxonomyTree, labels: SectorLabeling, level: str = "sector") -> float:
    """Fraction of size >= 2 label groups inducing a connected subtree."""
    groups: dict[str, set[str]] = {}
    for sym in tree.symbols:
        groups.setdefault(labels.label_of(sym, level), set()).add(sym)
    scored = {name: members for name, members in groups.items() if len(members) >= 2}
    if not scored:
        return 1.0
    adj = tree.adjacency()
    connected = 0
    for members in scored.values():
        start = next(iter(members))
        seen = {start}
        stack = [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt in members and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        connected += seen == members
    return connected / len(scored)


# ---------------------------------------------------------------------------
# exports


def export_tree(tree: TaxonomyTree, labels: SectorLabeling = EMPTY_LABELING, format: str = "dot") -> str:
    if format == "dot":
        return _to_dot(tree)
    if format == "graphml":
        return _to_graphml(tree)
    if format == "json":
        return _to_json(tree)
    raise ValidationError(f"unknown export format {format!r}, expected one of {EXPORT_FORMATS}")


def _to_dot(tree: TaxonomyTree) -> str:
    def q(name: str) -> str:
        return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["graph taxonomy {", "  node [shape=ellipse, style=filled];"]
    sectors = sorted({sector for _, sector, _ in tree.nodes})
    for sector in sectors:  # legend: one line per sector present
        lines.append(f"  // legend: {sector} = {color_for_sector(sector)}")
    for sym, sector, industry in tree.nodes:
        lines.append(
            f"  {q(sym)} [fillcolor={q(color_for_sector(sector))}, "
            f"sector={q(sector)}, industry={q(industry)}];"
        )
    for a, b, w in tree.edges:
        lines.append(f"  {q(a)} -- {q(b)} [label={q(fmt_sig12(w))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _to_graphml(tree: TaxonomyTree) -> str:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        '  <key id="sector" for="node" attr.name="sector" attr.type="string"/>',
        '  <key id="industry" for="node" attr.name="industry" attr.type="string"/>',
        '  <key id="color" for="node" attr.name="color" attr.type="string"/>',
        '  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>',
        '  <graph id="taxonomy" edgedefault="undirected">',
    ]
    for sym, sector, industry in tree.nodes:
        lines.append(f"    <node id={quoteattr(sym)}>")
        lines.append(f'      <data key="sector">{escape(sector)}</data>')
        lines.append(f'      <data key="industry">{escape(industry)}</data>')
        lines.append(f'      <data key="color">{escape(color_for_sector(sector))}</data>')
        lines.append("    </node>")
    for a, b, w in tree.edges:
        lines.append(f"    <edge source={quoteattr(a)} target={quoteattr(b)}>")
        lines.append(f'      <data key="weight">{fmt_sig12(w)}</data>')
        lines.append("    </edge>")
    lines.append("  </graph>")
    lines.append("</graphml>")
    return "\n".join(lines) + "\n"


def _to_json(tree: TaxonomyTree) -> str:
    payload = {
        "nodes": [
            {"symbol": s, "sector": sec, "industry": ind} for s, sec, ind in tree.nodes
        ],
        "edges": [
            {"source": a, "target": b, "weight": fmt_sig12(w)} for a, b, w in tree.edges
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


_DOT_NODE = re.compile(r'^\s*"(?P<sym>(?:[^"\\]|\\.)*)" \[fillcolor=.*, sector="(?P<sec>(?:[^"\\]|\\.)*)", industry="(?P<ind>(?:[^"\\]|\\.)*)"\];$')
_DOT_EDGE = re.compile(r'^\s*"(?P<a>(?:[^"\\]|\\.)*)" -- "(?P<b>(?:[^"\\]|\\.)*)" \[label="(?P<w>[^"]*)"\];$')


def _dot_unescape(s: str) -> str:
    return s.replace('\\"', '"').replace("\\\\", "\\")


def tree_from_export(text: str, format: str) -> TaxonomyTree:
    """Parse a document produced by :func:`export_tree` back into a tree.

    Only the shapes this module emits are recognized; this exists so every
    artifact format has a reader next to its writer.
    """
    if format == "json":
        payload = json.loads(text)
        nodes = tuple((n["symbol"], n["sector"], n["industry"]) for n in payload["nodes"])
        edges = tuple((e["source"], e["target"], float(e["weight"])) for e in payload["edges"])
        return TaxonomyTree(nodes, edges)
    if format == "graphml":
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        root = ET.fromstring(text)
        graph = root.find(f"{ns}graph")
        nodes, edges = [], []
        for node in graph.findall(f"{ns}node"):
            data = {d.get("key"): (d.text or "") for d in node.findall(f"{ns}data")}
            nodes.append((node.get("id"), data["sector"], data["industry"]))
        for edge in graph.findall(f"{ns}edge"):
            data = {d.get("key"): (d.text or "") for d in edge.findall(f"{ns}data")}
            edges.append((edge.get("source"), edge.get("target"), float(data["weight"])))
        return TaxonomyTree(tuple(nodes), tuple(edges))
    if format == "dot":
        nodes, edges = [], []
        for line in text.splitlines():
            m = _DOT_NODE.match(line)
            if m:
                nodes.append(tuple(_dot_unescape(m.group(g)) for g in ("sym", "sec", "ind")))
                continue
            m = _DOT_EDGE.match(line)
            if m:
                edges.append((_dot_unescape(m.group("a")), _dot_unescape(m.group("b")), float(m.group("w"))))
        if not nodes:
            raise ValidationError("no node statements found in DOT input")
        return TaxonomyTree(tuple(nodes), tuple(edges))
    raise ValidationError(f"unknown export format {format!r}, expected one of {EXPORT_FORMATS}")
