"""Annotate graph nodes and links with k-mer evidence from short reads.

Node sequences (and optional per-node variant sequences) are indexed by
canonical k-mer. A k-mer is *unique* when every occurrence lies in a
single node. Each read is scanned k-mer by k-mer:

* unique k-mers credit their node directly;
* a stretch of other k-mers (repeated, or absent because of a sequencing
  error or a node junction) between two unique anchors is credited when
  the anchors agree on where the read sits. Same-node anchors must agree
  on offset and strand; anchors on different nodes must be joined by
  exactly one graph path whose length matches the read distance;
* a stretch at a read end is credited to the adjacent anchor's node.

Only k-mers lying entirely inside a node are credited, so a node of
length L can receive at most L - k + 1 hits per copy.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .graph_model import AnnotatedGraph, Oriented, canonical_edge

_COMP = str.maketrans("ACGTN", "TGCAN")


def _rc(s: str) -> str:
    return s.translate(_COMP)[::-1]


def _canonical(kmer: str) -> tuple[str, bool]:
    """(canonical form, whether ``kmer`` itself is canonical)."""
    rc = _rc(kmer)
    return (kmer, True) if kmer <= rc else (rc, False)


@dataclass
class KmerIndex:
    k: int
    # canonical kmer -> [(node, offset, forward)], forward meaning the node
    # sequence carries the canonical form at that offset
    table: dict[str, list[tuple[str, int, bool]]]
    unique: dict[str, bool]
    expected_unique: dict[str, int]
    lengths: dict[str, int]
    # unique kmers with one unambiguous place on their node's main sequence
    placement: dict[str, tuple[str, int, bool]] = field(default_factory=dict)


class KmerIndexError(ValueError):
    pass


def build_kmer_index(g: AnnotatedGraph, k: int, node_seq_variants: Mapping[str, Iterable[str]] | None = None) -> KmerIndex:
    if k < 1:
        raise ValueError("k must be positive")
    longest = max((n.length for n in g.nodes.values()), default=0)
    if k > longest:
        raise KmerIndexError(f"k={k} exceeds the longest node ({longest} bp); the index would be empty")
    variants = node_seq_variants or {}
    unknown = set(variants) - set(g.nodes)
    if unknown:
        raise KeyError(f"variants given for unknown node(s): {sorted(unknown)}")
    table: dict[str, list] = defaultdict(list)
    main_hits: dict[str, list] = defaultdict(list)
    for v, node in g.nodes.items():
        for which, seq in enumerate([node.sequence, *variants.get(v, ())]):
            for i in range(len(seq) - k + 1):
                kmer = seq[i:i + k]
                if "N" in kmer:
                    continue
                canon, fwd = _canonical(kmer)
                entry = (v, i, fwd)
                if entry not in table[canon]:
                    table[canon].append(entry)
                if which == 0:
                    main_hits[canon].append(entry)
    unique = {c: len({e[0] for e in entries}) == 1 for c, entries in table.items()}
    placement = {}
    for c, entries in table.items():
        if not unique[c]:
            continue
        spots = main_hits.get(c) or entries
        if len(spots) == 1:
            placement[c] = spots[0]
    expected = {}
    for v, node in g.nodes.items():
        s = node.sequence
        expected[v] = sum(1 for i in range(len(s) - k + 1)
                          if "N" not in s[i:i + k] and unique[_canonical(s[i:i + k])[0]])
    return KmerIndex(k, dict(table), unique, expected, {v: n.length for v, n in g.nodes.items()}, placement)


@dataclass
class NodeHits:
    unique_hits: Counter = field(default_factory=Counter)
    rescued_hits: Counter = field(default_factory=Counter)
    transitions: Counter = field(default_factory=Counter)  # keyed by canonical edge

    def kmer_count(self, v: str) -> int:
        return self.unique_hits[v] + self.rescued_hits[v]

    def merge(self, other: "NodeHits") -> None:
        self.unique_hits.update(other.unique_hits)
        self.rescued_hits.update(other.rescued_hits)
        self.transitions.update(other.transitions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeHits):
            return NotImplemented
        strip = lambda c: {k: v for k, v in c.items() if v}
        return (strip(self.unique_hits) == strip(other.unique_hits)
                and strip(self.rescued_hits) == strip(other.rescued_hits)
                and strip(self.transitions) == strip(other.transitions))


@dataclass(frozen=True)
class _Anchor:
    pos: int        # k-mer index in the read
    node: str
    orient: str     # traversal orientation of the node by the read
    coord: int      # k-mer start along the node in traversal direction


def _anchor(idx: KmerIndex, pos: int, canon: str, read_fwd: bool) -> _Anchor | None:
    spot = idx.placement.get(canon)
    if spot is None:
        return None
    v, off, node_fwd = spot
    if read_fwd == node_fwd:
        return _Anchor(pos, v, "+", off)
    return _Anchor(pos, v, "-", idx.lengths[v] - idx.k - off)


class _PathFinder:
    """Graph paths between anchors on different nodes with a given length.

    Stops after ``max_paths`` hits; a search that exhausts its step budget
    is reported as ambiguous.
    """

    def __init__(self, g: AnnotatedGraph, max_paths: int = 2, budget: int = 20000):
        self.g = g
        self.max_paths = max_paths
        self.budget = budget

    def find(self, start: Oriented, target: Oriented, gap: int) -> list[list[Oriented]]:
        """Paths start -> ... -> target whose interior node lengths sum to ``gap``."""
        out: list[list[Oriented]] = []
        path = [start]
        steps = 0

        def dfs(node: Oriented, remaining: int) -> bool:
            nonlocal steps
            for nxt in self.g.successors(node):
                steps += 1
                if steps > self.budget:
                    return False
                if nxt == target and remaining == 0:
                    out.append(path + [nxt])
                    if len(out) >= self.max_paths:
                        return False
                L = self.g.nodes[nxt[0]].length
                if L <= remaining:
                    path.append(nxt)
                    if not dfs(nxt, remaining - L):
                        return False
                    path.pop()
            return True

        if gap >= 0 and not dfs(start, gap) and steps > self.budget:
            return out + [[]] * self.max_paths  # treat as ambiguous
        return out


def _credit_span(hits: NodeHits, idx: KmerIndex, walk: list[Oriented], first_coord: int, read_pos: int,
                 count: int, taken: set[int]) -> None:
    """Credit ``count`` consecutive read k-mers, starting at read position
    ``read_pos`` and walk coordinate ``first_coord``, to the node holding
    each k-mer entirely. Positions in ``taken`` are already credited."""
    k = idx.k
    spans = []
    base = 0
    for v, _ in walk:
        L = idx.lengths[v]
        spans.append((v, base, base + L - k))
        base += L
    for t in range(count):
        pos = read_pos + t
        if pos in taken:
            continue
        c = first_coord + t
        for v, lo, hi in spans:
            if lo <= c <= hi:
                hits.rescued_hits[v] += 1
                taken.add(pos)
                break


def annotate_read(seq: str, idx: KmerIndex, paths: _PathFinder) -> NodeHits:
    k = idx.k
    hits = NodeHits()
    n = len(seq) - k + 1
    if n <= 0:
        return hits
    anchors: list[_Anchor] = []
    taken: set[int] = set()
    for i in range(n):
        kmer = seq[i:i + k]
        if "N" in kmer:
            continue
        canon, fwd = _canonical(kmer)
        if idx.unique.get(canon):
            hits.unique_hits[idx.table[canon][0][0]] += 1
            taken.add(i)
            a = _anchor(idx, i, canon, fwd)
            if a is not None:
                anchors.append(a)
    if not anchors:
        return hits

    # read ends
    first, last = anchors[0], anchors[-1]
    if first.pos > 0:
        _credit_span(hits, idx, [(first.node, first.orient)], first.coord - first.pos, 0, first.pos, taken)
    if last.pos < n - 1:
        _credit_span(hits, idx, [(last.node, last.orient)], last.coord + 1, last.pos + 1, n - 1 - last.pos,
                     taken)

    for a, b in zip(anchors, anchors[1:]):
        d = b.pos - a.pos
        if a.node == b.node and a.orient == b.orient and b.coord - a.coord == d:
            if d > 1:
                _credit_span(hits, idx, [(a.node, a.orient)], a.coord + 1, a.pos + 1, d - 1, taken)
            continue
        if a.node == b.node and a.orient == b.orient and b.coord - a.coord > 0:
            continue  # same node, inconsistent offsets (e.g. an indel): drop
        la = idx.lengths[a.node]
        gap = d - (la - a.coord) - b.coord
        found = paths.find((a.node, a.orient), (b.node, b.orient), gap)
        if len(found) != 1:
            continue
        walk = found[0]
        if d > 1:
            _credit_span(hits, idx, walk, a.coord + 1, a.pos + 1, d - 1, taken)
        for e in zip(walk, walk[1:]):
            hits.transitions[canonical_edge(e)] += 1
    return hits


def annotate_reads(reads, idx: KmerIndex, g: AnnotatedGraph) -> NodeHits:
    """Sum of per-read hits, merged in read order."""
    missing = set(idx.lengths) - set(g.nodes)
    if missing:
        raise KeyError(f"index nodes absent from graph: {sorted(missing)[:5]}")
    paths = _PathFinder(g)
    total = NodeHits()
    records = reads.reads if hasattr(reads, "reads") else reads
    for _, seq in records:
        total.merge(annotate_read(seq.upper(), idx, paths))
    return total


def apply_annotation(g: AnnotatedGraph, hits: NodeHits, idx: KmerIndex | None = None) -> AnnotatedGraph:
    """KC = unique + rescued hits per node, EC = transitions per link.

    When ``idx`` is given the per-node expected unique k-mer count is
    recorded as well.
    """
    for v in list(hits.unique_hits) + list(hits.rescued_hits):
        if v not in g.nodes:
            raise KeyError(f"hits for unknown node {v!r}")
    for e in hits.transitions:
        if e not in g.edges:
            raise KeyError(f"hits for absent edge {e[0][0]}{e[0][1]} -> {e[1][0]}{e[1][1]}")
    nodes = {}
    for v, node in g.nodes.items():
        eu = idx.expected_unique.get(v, 0) if idx is not None else node.expected_unique
        nodes[v] = replace(node, kmer_count=hits.kmer_count(v), expected_unique=eu)
    edges = {}
    for e in g.edges:
        edges[e] = hits.transitions.get(canonical_edge(e), 0)
    return replace(g, nodes=nodes, edges=edges, kmer_size=idx.k if idx is not None else g.kmer_size, _succ=None)


def merge_max_over_k(graphs: list[AnnotatedGraph]) -> AnnotatedGraph:
    """Per node keep the annotation (from whichever k) with the highest depth.

    Counts from other k values are rescaled to the first graph's k so that
    depth normalisation stays consistent.
    """
    if not graphs:
        raise ValueError("nothing to merge")
    base = graphs[0]
    k0 = base.kmer_size

    def depth(g, v):
        n = g.nodes[v]
        return n.kmer_count / max(1, n.length - g.kmer_size + 1)

    nodes = {}
    for v, node in base.nodes.items():
        best = max(graphs, key=lambda g: depth(g, v))
        kc = round(depth(best, v) * max(1, node.length - k0 + 1))
        nodes[v] = replace(node, kmer_count=kc)
    edges = {e: max(g.edges.get(e, 0) for g in graphs) for e in base.edges}
    return replace(base, nodes=nodes, edges=edges, _succ=None)
