import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategies import THOUSAND
from tangle_qubo.graph_model import NodeRecord, build_graph, canonical_edge, reverse_complement
from tangle_qubo.kmer_annotator import (KmerIndexError, NodeHits, annotate_reads, apply_annotation,
                                        build_kmer_index, merge_max_over_k)
from tangle_qubo.synthgen import Genome, simulate_reads


def _rand(n, rnd):
    return "".join(rnd.choice("ACGT") for _ in range(n))


def _graph(seqs, links=()):
    return build_graph([NodeRecord(v, s) for v, s in seqs.items()], list(links), k=21)


def test_kmers_per_node():
    idx = build_kmer_index(_graph({"v": "ACGTA"}), 2)
    assert idx.expected_unique["v"] == 5 - 2 + 1


def test_shared_kmer_is_not_unique():
    rnd = random.Random(0)
    g = _graph({"a": _rand(10, rnd) + "ACGTACGT", "b": "ACGTACGT" + _rand(10, rnd)})
    idx = build_kmer_index(g, 8)
    canon = min("ACGTACGT", reverse_complement("ACGTACGT"))
    assert not idx.unique[canon]
    assert {e[0] for e in idx.table[canon]} == {"a", "b"}


def test_variant_kmers_map_to_same_node():
    rnd = random.Random(1)
    s = _rand(40, rnd)
    alt = s[:20] + ("A" if s[20] != "A" else "C") + s[21:]
    idx = build_kmer_index(_graph({"a": s}), 11, {"a": [alt]})
    for i in range(len(alt) - 10):
        kmer = alt[i:i + 11]
        canon = min(kmer, reverse_complement(kmer))
        assert {e[0] for e in idx.table[canon]} == {"a"}
        assert idx.unique[canon]


def test_expected_unique_bounded_by_kmer_count():
    rnd = random.Random(2)
    rep = _rand(30, rnd)
    g = _graph({"a": _rand(20, rnd) + rep, "b": rep + _rand(5, rnd), "c": "AC"})
    idx = build_kmer_index(g, 11)
    for v, n in g.nodes.items():
        assert 0 <= idx.expected_unique[v] <= max(0, n.length - 11 + 1)
    assert idx.expected_unique["b"] == 5


def test_k_longer_than_every_node():
    with pytest.raises(KmerIndexError):
        build_kmer_index(_graph({"a": "ACGT"}), 8)


def test_read_inside_one_node():
    rnd = random.Random(3)
    s = _rand(300, rnd)
    g = _graph({"a": s})
    idx = build_kmer_index(g, 21)
    hits = annotate_reads([("r", s[50:150])], idx, g)
    assert hits.unique_hits["a"] == 100 - 21 + 1
    assert hits.kmer_count("a") == 80


def test_read_across_link_counts_transition():
    rnd = random.Random(4)
    a, b = _rand(100, rnd), _rand(100, rnd)
    g = _graph({"a": a, "b": b}, [(("a", "+"), ("b", "+"))])
    idx = build_kmer_index(g, 21)
    hits = annotate_reads([("r", a[-50:] + b[:50])], idx, g)
    assert hits.transitions[canonical_edge((("a", "+"), ("b", "+")))] == 1
    # junction kmers lie in neither node
    assert hits.kmer_count("a") == 50 - 21 + 1
    assert hits.kmer_count("b") == 50 - 21 + 1


def test_interior_repeat_run_rescued():
    rnd = random.Random(5)
    rep = _rand(25, rnd)
    a = _rand(60, rnd) + rep + _rand(60, rnd)
    b = _rand(30, rnd) + rep + _rand(30, rnd)
    g = _graph({"a": a, "b": b})
    idx = build_kmer_index(g, 11)
    read = a[20:125]
    hits = annotate_reads([("r", read)], idx, g)
    # brute-force: which read kmers also occur in b (either strand)
    shared = sum(1 for i in range(len(read) - 10)
                 if read[i:i + 11] in b or reverse_complement(read[i:i + 11]) in b)
    assert shared > 0
    assert hits.rescued_hits["a"] == shared
    assert hits.unique_hits["a"] == len(read) - 10 - shared
    assert hits.kmer_count("b") == 0


def test_end_run_rescued_to_adjacent_node():
    rnd = random.Random(6)
    rep = _rand(25, rnd)
    a = rep + _rand(80, rnd)
    g = _graph({"a": a, "b": _rand(30, rnd) + rep})
    idx = build_kmer_index(g, 11)
    hits = annotate_reads([("r", a[:70])], idx, g)
    assert hits.kmer_count("a") == 70 - 11 + 1
    assert hits.rescued_hits["a"] > 0


def test_apply_annotation_empty_hits():
    g = _graph({"a": "ACGT" * 10, "b": "GGA" * 10}, [(("a", "+"), ("b", "+"), 7)])
    out = apply_annotation(g, NodeHits())
    assert all(n.kmer_count == 0 for n in out.nodes.values())
    assert set(out.edges.values()) == {0}


def test_apply_annotation_sums_hits():
    g = _graph({"a": "ACGT" * 10})
    hits = NodeHits()
    hits.unique_hits["a"] = 10
    hits.rescued_hits["a"] = 2
    assert apply_annotation(g, hits).nodes["a"].kmer_count == 12


def test_apply_annotation_absent_edge():
    g = _graph({"a": "ACGT" * 10, "b": "GGA" * 10})
    hits = NodeHits()
    hits.transitions[(("a", "+"), ("b", "+"))] = 1
    with pytest.raises(KeyError, match="a\\+ -> b\\+"):
        apply_annotation(g, hits)


def test_apply_annotation_unknown_node():
    hits = NodeHits()
    hits.unique_hits["zz"] = 1
    with pytest.raises(KeyError):
        apply_annotation(_graph({"a": "ACGT" * 10}), hits)


def test_depth_tracks_copy_number_at_30x():
    rnd = random.Random(7)
    k = 21
    a, b, c = _rand(1500, rnd), _rand(1000, rnd), _rand(1200, rnd)
    genome = a + b + a + c
    g = _graph({"a": a, "b": b, "c": c},
               [(("a", "+"), ("b", "+")), (("b", "+"), ("a", "+")), (("a", "+"), ("c", "+"))])
    idx = build_kmer_index(g, k)
    reads = simulate_reads(Genome("t", genome), 30, 100, 0.0, seed=11)
    out = apply_annotation(g, annotate_reads(reads, idx, g), idx)
    # base coverage seen through kmers: each read contributes read_length - k + 1 of them
    kmer_coverage = len(reads.reads) * (100 - k + 1) / (len(genome) - 100 + 1)
    for v, copies in (("a", 2), ("b", 1), ("c", 1)):
        depth = out.nodes[v].kmer_count / (out.nodes[v].length - k + 1)
        expected = kmer_coverage * copies
        assert abs(depth - expected) <= 0.15 * expected, (v, depth, expected)


def test_merge_max_over_k_picks_deepest():
    rnd = random.Random(8)
    s = _rand(120, rnd)
    g = _graph({"a": s})
    low = apply_annotation(g, NodeHits(unique_hits={"a": 50}), build_kmer_index(g, 21))
    high = apply_annotation(g, NodeHits(unique_hits={"a": 300}), build_kmer_index(g, 31))
    merged = merge_max_over_k([low, high])
    assert merged.nodes["a"].kmer_count == round(300 / (120 - 31 + 1) * (120 - 21 + 1))


@st.composite
def indexed_reads(draw):
    seed = draw(st.integers(0, 10**6))
    rnd = random.Random(seed)
    k = 7
    n = draw(st.integers(1, 4))
    seqs = {f"v{i}": _rand(rnd.randint(8, 30), rnd) for i in range(n)}
    # occasionally plant a shared stretch so some kmers are repeated
    if n > 1 and draw(st.booleans()):
        rep = _rand(10, rnd)
        seqs["v0"] = seqs["v0"] + rep
        seqs["v1"] = rep + seqs["v1"]
    ids = list(seqs)
    walk = [(rnd.choice(ids), rnd.choice("+-")) for _ in range(draw(st.integers(1, 4)))]
    links = [(a, b) for a, b in zip(walk, walk[1:])]
    g = build_graph([NodeRecord(v, s) for v, s in seqs.items()], links, k=k)
    spelled = "".join(seqs[v] if o == "+" else reverse_complement(seqs[v]) for v, o in walk)
    lo = draw(st.integers(0, len(spelled) - 1))
    hi = draw(st.integers(lo + 1, len(spelled)))
    read = list(spelled[lo:hi])
    for _ in range(draw(st.integers(0, 2))):
        if read:
            i = rnd.randrange(len(read))
            read[i] = rnd.choice("ACGT")
    return g, build_kmer_index(g, k), "".join(read)


@THOUSAND
@given(indexed_reads())
def test_strand_invariance(case):
    g, idx, read = case
    assert annotate_reads([("r", read)], idx, g) == annotate_reads([("r", reverse_complement(read))], idx, g)


@THOUSAND
@given(indexed_reads())
def test_hits_conserved(case):
    g, idx, read = case
    hits = annotate_reads([("r", read)], idx, g)
    credited = sum(hits.unique_hits.values()) + sum(hits.rescued_hits.values())
    assert credited <= max(0, len(read) - idx.k + 1)
    assert all(c >= 0 for c in [*hits.unique_hits.values(), *hits.rescued_hits.values(),
                                 *hits.transitions.values()])
    for e in hits.transitions:
        assert e in g.edges
