"""Oriented, vertex-weighted pangenome graph.

Every node ``v`` exists in two orientations, ``(v, "+")`` and ``(v, "-")``.
An edge ``(a, o1) -> (b, o2)`` always coexists with its mirror
``(b, flip(o2)) -> (a, flip(o1))``; the constructors below maintain that.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .gfa_io import GfaDocument, GfaLink, GfaSegment, Tag

log = logging.getLogger(__name__)

Oriented = tuple[str, str]
Edge = tuple[Oriented, Oriented]

_COMPLEMENT = str.maketrans("ACGTN", "TGCAN")
_DNA = frozenset("ACGTN")


def reverse_complement(seq: str) -> str:
    bad = set(seq) - _DNA
    if bad:
        raise ValueError(f"non-DNA characters {sorted(bad)} in sequence")
    return seq.translate(_COMPLEMENT)[::-1]


def flip(o: str) -> str:
    return "-" if o == "+" else "+"


def mirror(edge: Edge) -> Edge:
    (a, oa), (b, ob) = edge
    return (b, flip(ob)), (a, flip(oa))


def canonical_edge(edge: Edge) -> Edge:
    """The representative of an edge/mirror pair used for GFA output."""
    return min(edge, mirror(edge))


@dataclass(frozen=True)
class NodeRecord:
    id: str
    sequence: str
    kmer_count: int = 0
    expected_unique: int | None = None
    weight: float = 0.0

    @property
    def length(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class AnnotatedGraph:
    nodes: Mapping[str, NodeRecord]
    edges: Mapping[Edge, int]
    kmer_size: int
    baseline_depth: float | None = None
    _succ: dict = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        succ: dict[Oriented, list[Oriented]] = {}
        for (a, b) in self.edges:
            for end in (a, b):
                if end[0] not in self.nodes:
                    raise KeyError(f"edge endpoint {end[0]!r} is not a node")
            if mirror((a, b)) not in self.edges:
                raise ValueError(f"edge {a}->{b} is missing its mirror")
            succ.setdefault(a, []).append(b)
        for v in succ.values():
            v.sort()
        object.__setattr__(self, "_succ", succ)

    @property
    def node_ids(self) -> list[str]:
        return list(self.nodes)

    def successors(self, o: Oriented) -> list[Oriented]:
        return self._succ.get(o, [])

    def has_edge(self, a: Oriented, b: Oriented) -> bool:
        return (a, b) in self.edges

    def weights(self) -> dict[str, float]:
        return {v: n.weight for v, n in self.nodes.items()}

    def links(self) -> list[tuple[Edge, int]]:
        """One entry per edge/mirror pair."""
        seen = set()
        out = []
        for e, c in self.edges.items():
            ce = canonical_edge(e)
            if ce not in seen:
                seen.add(ce)
                out.append((ce, c))
        return sorted(out)

    def with_weights(self, weights: Mapping[str, float]) -> "AnnotatedGraph":
        nodes = {v: replace(n, weight=float(weights.get(v, 0.0))) for v, n in self.nodes.items()}
        return replace(self, nodes=nodes, _succ=None)

    def with_edges(self, edges: Mapping[Edge, int]) -> "AnnotatedGraph":
        return replace(self, edges=dict(edges), _succ=None)


def build_graph(nodes: Iterable[NodeRecord], links: Iterable[tuple[Oriented, Oriented] | tuple[Oriented, Oriented, int]],
                k: int = 31, baseline_depth: float | None = None) -> AnnotatedGraph:
    """Assemble a graph from nodes and links; mirrors are added automatically."""
    node_map = {n.id: n for n in nodes}
    edges: dict[Edge, int] = {}
    for link in links:
        a, b = link[0], link[1]
        count = int(link[2]) if len(link) > 2 else 0
        edges[(a, b)] = count
        edges[mirror((a, b))] = count
    return AnnotatedGraph(node_map, edges, k, baseline_depth)


def from_gfa(doc: GfaDocument, k: int) -> AnnotatedGraph:
    """Build the graph from a GFA document.

    Kmer counts come from ``KC:i``, else ``SC:i``, else ``dc:f`` times the
    node length (rounded).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    doc.validate()
    nodes: dict[str, NodeRecord] = {}
    for seg in doc.segments:
        if seg.sequence == "*" or len(seg.sequence) < 1:
            raise ValueError(f"segment {seg.id!r} has no sequence")
        kc = seg.kc
        if kc is None:
            kc = seg.sc
        if kc is None and seg.dc is not None:
            kc = int(round(seg.dc * len(seg.sequence)))
        eu = seg.int_tag("EU")
        weight = float(seg.tags["CN"].value) if "CN" in seg.tags else 0.0
        nodes[seg.id] = NodeRecord(seg.id, seg.sequence, kc or 0, eu, weight)
    if nodes and all(n.length < k for n in nodes.values()):
        warnings.warn(f"k={k} exceeds every node length; kmer-derived fields default to 0")
    edges: dict[Edge, int] = {}
    for link in doc.links:
        e = ((link.from_id, link.from_orient), (link.to_id, link.to_orient))
        count = link.ec or 0
        edges[e] = count
        edges[mirror(e)] = count
    return AnnotatedGraph(nodes, edges, k)


def to_gfa(g: AnnotatedGraph, weights: bool = True) -> GfaDocument:
    """Render the graph as GFA: KC:i (and CN:f, EU:i) on segments, EC:i on links."""
    doc = GfaDocument(headers=["H\tVN:Z:1.0"])
    for v, n in g.nodes.items():
        tags = {"KC": Tag("i", n.kmer_count), "LN": Tag("i", n.length)}
        if n.expected_unique is not None:
            tags["EU"] = Tag("i", n.expected_unique)
        if weights:
            tags["CN"] = Tag("f", float(n.weight))
        doc.segments.append(GfaSegment(v, n.sequence, tags))
    for ((a, oa), (b, ob)), c in g.links():
        doc.links.append(GfaLink(a, oa, b, ob, "0M", {"EC": Tag("i", int(c))}))
    return doc


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    half = cum[-1] / 2.0
    idx = int(np.searchsorted(cum, half, side="left"))
    # exact half falls between two entries: average them
    if idx + 1 < len(v) and math.isclose(cum[idx], half):
        return float((v[idx] + v[idx + 1]) / 2.0)
    return float(v[idx])


def node_depths(g: AnnotatedGraph, use_expected_unique: bool = False) -> dict[str, float]:
    k = g.kmer_size
    depths = {}
    for v, n in g.nodes.items():
        denom = max(1, n.length - k + 1)
        if use_expected_unique and n.expected_unique:
            denom = n.expected_unique
        depths[v] = n.kmer_count / denom
    return depths


def normalize_copy_numbers(g: AnnotatedGraph, sequencing_depth: float | None = None,
                           use_expected_unique: bool = False) -> AnnotatedGraph:
    """Turn kmer counts into copy numbers.

    depth(v) = KC(v) / max(1, L(v) - k + 1) (or the node's expected unique
    kmer count when ``use_expected_unique``). Copy number is depth divided
    by ``sequencing_depth`` if given, otherwise by the length-weighted
    median depth over nodes with a non-zero count.
    """
    if not g.nodes or all(n.kmer_count == 0 for n in g.nodes.values()):
        raise ValueError("all kmer counts are zero; baseline depth is undefined")
    depths = node_depths(g, use_expected_unique)
    if sequencing_depth is not None:
        if sequencing_depth <= 0:
            raise ValueError("sequencing_depth must be positive")
        baseline = float(sequencing_depth)
    else:
        ids = [v for v, n in g.nodes.items() if n.kmer_count > 0]
        vals = np.array([depths[v] for v in ids], dtype=float)
        lens = np.array([g.nodes[v].length for v in ids], dtype=float)
        baseline = _weighted_median(vals, lens)
    nodes = {v: replace(n, weight=depths[v] / baseline) for v, n in g.nodes.items()}
    return replace(g, nodes=nodes, baseline_depth=baseline, _succ=None)


def _component_count(nodes: Iterable[str], edges: Iterable[Edge]) -> int:
    parent = {v: v for v in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (a, _), (b, _) in edges:
        if a in parent and b in parent:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    return len({find(v) for v in parent})


def trim_zero_weight_edges(g: AnnotatedGraph) -> AnnotatedGraph:
    """Drop superfluous zero-count edges around well-supported nodes.

    A node qualifies when, in its forward orientation, it has several
    in-edges and several out-edges, and at least one in-edge and one
    out-edge carry a non-zero count and lead to a node of non-zero weight.
    Its zero-count edges are then removed one at a time (with their
    mirrors), skipping any removal that would change the number of weakly
    connected components among positive-weight nodes. Single pass over
    nodes in id order.
    """
    positive = [v for v, n in g.nodes.items() if n.weight > 0]
    edges = dict(g.edges)
    base = _component_count(positive, edges)

    for v in sorted(g.nodes):
        here = (v, "+")
        ins = sorted(e for e in edges if e[1] == here)
        outs = sorted(e for e in edges if e[0] == here)
        if len(ins) < 2 or len(outs) < 2:
            continue
        supported_in = any(edges[e] > 0 and g.nodes[e[0][0]].weight > 0 for e in ins)
        supported_out = any(edges[e] > 0 and g.nodes[e[1][0]].weight > 0 for e in outs)
        if not (supported_in and supported_out):
            continue
        for e in sorted(set(ins) | set(outs)):
            if e not in edges or edges[e] != 0:
                continue
            trial = dict(edges)
            trial.pop(e, None)
            trial.pop(mirror(e), None)
            if _component_count(positive, trial) == base:
                edges = trial
                log.debug("trimmed edge %s -> %s", e[0], e[1])
    return g.with_edges(edges)


def _link_sides(edge: Edge) -> tuple[tuple[str, str], tuple[str, str]]:
    """Node sides touched by an edge: it leaves one side of its source and
    enters one side of its target ("L"/"R" of the forward sequence)."""
    (a, oa), (b, ob) = edge
    return (a, "R" if oa == "+" else "L"), (b, "L" if ob == "+" else "R")


def propagate_copy_numbers(g: AnnotatedGraph, min_kmers: int = 5, full_confidence_kmers: int = 50,
                           conservation: float = 3.0) -> AnnotatedGraph:
    """Fill in copy numbers of nodes too short to carry k-mer evidence.

    Non-negative flows on links are fitted so that, for every node with at
    least ``min_kmers`` interior k-mers, the flow through each linked side
    matches its measured copy number (weighted by how many k-mers back the
    measurement), and flow into a node equals flow out of it. Nodes below
    full confidence then take the mean fitted flow through their linked
    sides; well-measured nodes keep their weights.
    """
    from scipy.optimize import nnls

    links = g.links()
    if not links:
        return g
    k = g.kmer_size
    col = {}
    side_links: dict[tuple[str, str], list[int]] = {}
    for j, (e, _) in enumerate(links):
        col[e] = j
        for s in _link_sides(e):
            side_links.setdefault(s, []).append(j)

    def kmers(v):
        return g.nodes[v].length - k + 1

    rows, rhs = [], []
    for v, n in g.nodes.items():
        sides = [s for s in ("L", "R") if (v, s) in side_links]
        if kmers(v) >= min_kmers:
            c = math.sqrt(min(1.0, kmers(v) / full_confidence_kmers))
            for s in sides:
                r = np.zeros(len(links))
                for j in side_links[(v, s)]:
                    r[j] += c
                rows.append(r)
                rhs.append(c * n.weight)
        if len(sides) == 2:
            r = np.zeros(len(links))
            for j in side_links[(v, "L")]:
                r[j] += conservation
            for j in side_links[(v, "R")]:
                r[j] -= conservation
            rows.append(r)
            rhs.append(0.0)
    if not rows:
        return g
    flows, _ = nnls(np.array(rows), np.array(rhs))
    weights = {}
    for v, n in g.nodes.items():
        sides = [s for s in ("L", "R") if (v, s) in side_links]
        if kmers(v) >= full_confidence_kmers or not sides:
            weights[v] = n.weight
        else:
            weights[v] = float(np.mean([sum(flows[j] for j in side_links[(v, s)]) for s in sides]))
    return g.with_weights(weights)
