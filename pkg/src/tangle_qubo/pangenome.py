"""Build a pangenome graph with blunt (0M) links from a set of genomes.

Each genome is read as a walk over canonical odd-length k-mers. A k-mer
contributes only its centre base, so node sequences of a compacted walk
graph concatenate without overlap. Every genome is padded with the same
random caps of ``(k-1)/2`` bases on each side, which makes the threaded
walk of a genome spell that genome exactly.

Optional bubble popping collapses simple two-branch bubbles onto the
branch most genomes take, then re-compacts; the sequences the training
genomes actually carry through each node are kept as recognition
variants for read annotation.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .graph_model import AnnotatedGraph, NodeRecord, Oriented, build_graph, flip, reverse_complement

_COMP = str.maketrans("ACGTN", "TGCAN")


@dataclass
class Pangenome:
    graph: AnnotatedGraph
    paths: dict[str, list[Oriented]]
    variants: dict[str, list[str]] = field(default_factory=dict)
    left_cap: str = ""
    right_cap: str = ""


# --- generic walk-graph compaction -------------------------------------------------

class _WalkGraph:
    """Nodes with blunt sequences plus the oriented walks that define edges.

    ``spans[g][i]`` is how many bases of genome ``g`` visit ``i`` covers;
    it survives bubble popping, so true per-genome node sequences can be
    recovered afterwards.
    """

    def __init__(self, seqs: dict, walks: dict[str, list], spans: dict[str, list[int]]):
        self.seqs = seqs
        self.walks = walks
        self.spans = spans
        self._index()

    def _index(self):
        succ: dict = defaultdict(lambda: defaultdict(int))
        for w in self.walks.values():
            for a, b in zip(w, w[1:]):
                succ[a][b] += 1
                ma, mb = (b[0], flip(b[1])), (a[0], flip(a[1]))
                if (ma, mb) != (a, b):
                    succ[ma][mb] += 1
        self.succ = succ

    def out(self, x):
        return self.succ.get(x, {})

    def pred(self, x):
        return [(z[0], flip(z[1])) for z in self.out((x[0], flip(x[1])))]

    def _joinable(self, x, y) -> bool:
        return len(self.out(x)) == 1 and len(self.pred(y)) == 1 and x[0] != y[0]

    def compact(self, order: list) -> "_WalkGraph":
        """Merge maximal non-branching chains. ``order`` fixes node numbering."""
        done = set()
        chains = []
        for nid in order:
            if nid in done:
                continue
            x = (nid, "+")
            members = {nid}
            # walk back to the chain start
            while True:
                p = self.pred(x)
                if len(p) != 1 or not self._joinable(p[0], x) or p[0][0] in members:
                    break
                x = p[0]
                members.add(x[0])
            chain = [x]
            members = {x[0]}
            while True:
                nxt = list(self.out(chain[-1]))
                if len(nxt) != 1 or not self._joinable(chain[-1], nxt[0]) or nxt[0][0] in members:
                    break
                chain.append(nxt[0])
                members.add(nxt[0][0])
            done |= members
            chains.append(chain)
        where = {}
        seqs = {}
        for ci, chain in enumerate(chains):
            parts = []
            for pos, (nid, o) in enumerate(chain):
                where[nid] = (ci, pos, o)
                s = self.seqs[nid]
                parts.append(s if o == "+" else s.translate(_COMP)[::-1])
            seqs[ci] = "".join(parts)
        walks, spans = {}, {}
        for g, w in self.walks.items():
            sp = self.spans[g]
            nw, ns = [], []
            i = 0
            while i < len(w):
                nid, o = w[i]
                ci, pos, co = where[nid]
                L = len(chains[ci])
                forward = o == co
                if L > 1 and pos != (0 if forward else L - 1):
                    raise AssertionError("walk enters a chain in its interior")
                take = min(L, len(w) - i)
                nw.append((ci, "+" if forward else "-"))
                ns.append(sum(sp[i:i + take]))
                i += take
            walks[g], spans[g] = nw, ns
        return _WalkGraph(seqs, walks, spans)

    def first_seen(self) -> list:
        order, seen = [], set()
        for w in self.walks.values():
            for nid, _ in w:
                if nid not in seen:
                    seen.add(nid)
                    order.append(nid)
        return order

    def _superbubble_exit(self, s, max_nodes: int):
        """Exit of the acyclic single-entrance/single-exit region opened at
        ``s``, or None. Standard frontier scan: a node is entered only once
        all its predecessors have been visited."""
        seen = {s}
        visited = set()
        stack = [s]
        while stack:
            v = stack.pop()
            visited.add(v)
            if len(visited) > max_nodes:
                return None, None
            outs = list(self.out(v))
            if not outs:
                return None, None
            for u in outs:
                if u[0] == s[0]:
                    return None, None
                seen.add(u)
                if all(p in visited for p in self.pred(u)):
                    stack.append(u)
            if len(stack) == 1 and len(seen) == len(visited) + 1:
                t = stack[0]
                inner = visited - {s}
                ids = [x[0] for x in inner]
                if t in self.out(s) and not inner:
                    return None, None
                if len(set(ids)) != len(ids) or t[0] in ids:
                    return None, None
                return t, inner
        return None, None

    def pop_bubbles(self, max_branch: int, max_nodes: int = 64) -> int:
        """Collapse bubbles whose every traversal between entrance and exit
        spells at most ``max_branch`` bases onto the most travelled
        traversal. Bubbles sharing a node with one already popped in this
        pass wait for the next pass. Returns how many were popped."""
        plans = []
        touched = set()
        for nid in self.first_seen():
            for o in ("+", "-"):
                s = (nid, o)
                if len(self.out(s)) < 2:
                    continue
                t, inner = self._superbubble_exit(s, max_nodes)
                if t is None:
                    continue
                region = {s[0], t[0], *(x[0] for x in inner)}
                if touched & region:
                    continue
                if any(len(self.seqs[x[0]]) > max_branch for x in inner):
                    continue
                segs = self._traversals(s, t)
                if len(segs) < 2:
                    continue
                if max(sum(len(self.seqs[x[0]]) for x in seg) for seg in segs) > max_branch:
                    continue
                # most-travelled traversal wins; ties go to the smaller spelling
                keep = min(segs, key=lambda seg: (-segs[seg], self._spell(seg)))
                plans.append((s, t, keep))
                touched |= region
        for s, t, keep in plans:
            self._rewrite(s, t, list(keep))
        if plans:
            self._index()
        return len(plans)

    def _spell(self, seg) -> str:
        return "".join(self.seqs[n] if o == "+" else self.seqs[n].translate(_COMP)[::-1] for n, o in seg)

    def _traversals(self, s, t) -> Counter:
        """Interior visit sequences between s and t over all walks (both strands)."""
        segs: Counter = Counter()
        rs, rt = (s[0], flip(s[1])), (t[0], flip(t[1]))
        for w in self.walks.values():
            for i, v in enumerate(w):
                if v == s:
                    j = w.index(t, i + 1) if t in w[i + 1:] else None
                    if j is not None:
                        segs[tuple(w[i + 1:j])] += 1
                elif v == rt:
                    j = w.index(rs, i + 1) if rs in w[i + 1:] else None
                    if j is not None:
                        segs[tuple((n, flip(o)) for n, o in reversed(w[i + 1:j]))] += 1
        return segs

    def _rewrite(self, s, t, keep: list) -> None:
        rs, rt = (s[0], flip(s[1])), (t[0], flip(t[1]))
        rkeep = [(n, flip(o)) for n, o in reversed(keep)]
        for g, w in self.walks.items():
            sp = self.spans[g]
            nw, ns = [], []
            i = 0
            while i < len(w):
                v = w[i]
                end = {s: t, rt: rs}.get(v)
                if end is not None and end in w[i + 1:]:
                    j = w.index(end, i + 1)
                    body = keep if v == s else rkeep
                    inner_span = sum(sp[i + 1:j])
                    nw.append(v)
                    ns.append(sp[i])
                    # the genome's own bases stay attached to the first kept visit
                    for q, b in enumerate(body):
                        nw.append(b)
                        ns.append(inner_span if q == 0 else 0)
                    if not body and inner_span:
                        ns[-1] += inner_span
                    i = j
                    continue
                nw.append(v)
                ns.append(sp[i])
                i += 1
            self.walks[g], self.spans[g] = nw, ns


# --- public builder --------------------------------------------------------------------

def _canonical(kmer: str) -> tuple[str, str]:
    rc = kmer.translate(_COMP)[::-1]
    return (kmer, "+") if kmer <= rc else (rc, "-")


def build_pangenome(genomes: list[tuple[str, str]], k: int = 31, seed: int = 0,
                    pop_bubbles: bool = False, max_branch: int | None = None) -> Pangenome:
    """Compacted walk graph of ``genomes`` with per-genome true paths."""
    if k < 3 or k % 2 == 0:
        raise ValueError("k must be odd and >= 3")
    if not genomes:
        raise ValueError("no genomes given")
    h = (k - 1) // 2
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    caps = ["".join("ACGT"[i] for i in rng.integers(0, 4, h)) for _ in range(2)]

    ids: dict[str, int] = {}
    seqs: dict[int, str] = {}
    walks: dict[str, list] = {}
    for gid, seq in genomes:
        if "N" in seq:
            raise ValueError(f"genome {gid} contains N")
        padded = caps[0] + seq + caps[1]
        if len(padded) < k:
            raise ValueError(f"genome {gid} is shorter than k")
        w = []
        for i in range(len(padded) - k + 1):
            canon, o = _canonical(padded[i:i + k])
            kid = ids.get(canon)
            if kid is None:
                kid = ids[canon] = len(ids)
                seqs[kid] = canon[h]
            w.append((kid, o))
        walks[gid] = w
    graph = _WalkGraph(seqs, walks, {g: [1] * len(w) for g, w in walks.items()})
    graph = graph.compact(graph.first_seen())
    if pop_bubbles:
        limit = max_branch if max_branch is not None else 4 * k
        while graph.pop_bubbles(limit):
            graph = graph.compact(graph.first_seen())

    return _finalise(graph, genomes, caps, h)


def _finalise(graph: _WalkGraph, genomes, caps, h) -> Pangenome:
    # number nodes by first appearance and orient them along their first visit
    order = graph.first_seen()
    first_orient = {}
    for w in graph.walks.values():
        for nid, o in w:
            first_orient.setdefault(nid, o)
    name = {nid: f"n{i + 1}" for i, nid in enumerate(order)}

    def relabel(v):
        nid, o = v
        return (name[nid], o if first_orient[nid] == "+" else flip(o))

    node_seq = {}
    for nid in order:
        s = graph.seqs[nid]
        node_seq[name[nid]] = s if first_orient[nid] == "+" else reverse_complement(s)
    paths = {g: [relabel(v) for v in w] for g, w in graph.walks.items()}

    edge_counts: dict = defaultdict(int)
    for w in paths.values():
        for a, b in zip(w, w[1:]):
            edge_counts[(a, b)] += 1
    links = []
    seen = set()
    for (a, b), c in edge_counts.items():
        m = ((b[0], flip(b[1])), (a[0], flip(a[1])))
        key = min((a, b), m)
        if key in seen:
            continue
        seen.add(key)
        links.append((a, b, c + (edge_counts.get(m, 0) if m != (a, b) else 0)))

    variants: dict[str, set] = defaultdict(set)
    for gid, seq in genomes:
        padded = caps[0] + seq + caps[1]
        pos = h
        for (v, o), span in zip(paths[gid], graph.spans[gid]):
            piece = padded[pos:pos + span]
            pos += span
            if o == "-":
                piece = reverse_complement(piece)
            if piece != node_seq[v]:
                variants[v].add(piece)

    g = build_graph([NodeRecord(v, node_seq[v]) for v in node_seq], links, k=2 * h + 1)
    return Pangenome(g, paths, {v: sorted(s) for v, s in sorted(variants.items())}, caps[0], caps[1])
