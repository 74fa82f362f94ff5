import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategies import THOUSAND
from tangle_qubo.evaluator import EvalReport, align, evaluate
from tangle_qubo.graph_model import reverse_complement

PERFECT = (100.0, 100.0, 1, 0, 0, 0, 100.0)


def _rand(n, seed):
    rnd = random.Random(seed)
    return "".join(rnd.choice("ACGT") for _ in range(n))


def _snp(s, positions):
    out = list(s)
    for p in positions:
        out[p] = "A" if s[p] != "A" else "C"
    return "".join(out)


def _check_segment(seg):
    assert seg.te - seg.ts == seg.matches + seg.mismatches + seg.deletions
    assert seg.ce - seg.cs == seg.matches + seg.mismatches + seg.insertions


def test_identical_sequence_single_segment():
    s = _rand(3000, 1)
    (seg,) = align(s, s)
    assert (seg.ts, seg.te, seg.cs, seg.ce, seg.strand) == (0, 3000, 0, 3000, "+")
    assert seg.matches == 3000
    _check_segment(seg)


def test_reverse_complement_single_minus_segment():
    s = _rand(3000, 2)
    (seg,) = align(s, reverse_complement(s))
    assert seg.strand == "-"
    assert seg.matches == 3000
    _check_segment(seg)


def test_block_swap_gives_several_segments():
    s = _rand(4000, 3)
    block = s[1000:1500]
    moved = s[:1000] + s[1500:3000] + block + s[3000:]
    segs = align(s, moved)
    assert len(segs) >= 2
    for seg in segs:
        _check_segment(seg)
        assert s[seg.ts:seg.te] == moved[seg.cs:seg.ce]
    rep = evaluate(s, [moved])
    assert rep.breaks >= 1
    assert rep.pct_covered == 100.0


def test_identical_report():
    s = _rand(2000, 4)
    assert evaluate(s, [s]).as_tuple() == PERFECT


def test_missing_last_half():
    s = _rand(4000, 5)
    rep = evaluate(s, [s[:2000]])
    assert abs(rep.pct_covered - 50) <= 1
    assert rep.pct_used == 100.0


def test_twelve_bp_deletion():
    s = _rand(3000, 6)
    rep = evaluate(s, [s[:1500] + s[1512:]])
    assert rep.indels_ge10 == 1
    assert rep.contigs == 1 and rep.breaks == 0


def test_short_indel_not_counted():
    s = _rand(3000, 7)
    rep = evaluate(s, [s[:1500] + s[1505:]])
    assert rep.indels_ge10 == 0
    assert rep.pct_identity == pytest.approx(100 * 2995 / 3000, abs=1e-9)


def test_mismatch_cluster_is_one_diff_region():
    s = _rand(3000, 8)
    cand = _snp(s, range(1400, 1466, 2))  # 33 mismatches inside 100 bp
    rep = evaluate(s, [cand])
    assert rep.diff_regions == 1
    sparse = evaluate(s, [_snp(s, range(100, 2900, 100))])
    assert sparse.diff_regions == 0


def test_identity_counts_mismatches_and_gaps():
    s = _rand(3000, 9)
    cand = _snp(s, [500, 900, 1300])
    rep = evaluate(s, [cand])
    assert rep.pct_identity == pytest.approx(100 * 2997 / 3000)


def test_no_contigs():
    rep = evaluate(_rand(500, 10), [])
    assert rep.contigs == 0 and rep.pct_covered == 0


def test_unrelated_contig_aligns_nowhere():
    rep = evaluate(_rand(2000, 11), [_rand(2000, 12)])
    assert rep.pct_covered == 0 and rep.pct_used == 0


def test_two_contigs_split_truth():
    s = _rand(4000, 13)
    rep = evaluate(s, [s[:2100], reverse_complement(s[1900:])])
    assert rep.as_tuple() == (100.0, 100.0, 2, 0, 0, 0, 100.0)


def test_report_serialisation():
    rep = EvalReport(99.5, 100.0, 2, 1, 0, 3, 98.25)
    assert json.loads(rep.to_json())["pct_identity"] == 98.25
    header, row = rep.to_tsv().splitlines()
    assert header.split("\t") == ["Covered", "Used", "Contigs", "Breaks", "Indel", "Diff", "Identity"]
    assert row.split("\t")[2] == "2"


@st.composite
def mutated(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rnd = random.Random(seed)
    n = draw(st.integers(200, 800))
    truth = "".join(rnd.choice("ACGT") for _ in range(n))
    cand = list(truth)
    for _ in range(draw(st.integers(0, 6))):
        p = rnd.randrange(len(cand))
        kind = rnd.choice(["snp", "ins", "del"])
        if kind == "snp":
            cand[p] = rnd.choice("ACGT")
        elif kind == "ins":
            cand[p:p] = list("".join(rnd.choice("ACGT") for _ in range(rnd.randint(1, 15))))
        else:
            del cand[p:p + rnd.randint(1, 15)]
    return truth, "".join(cand)


@THOUSAND
@given(st.integers(200, 1500), st.integers(0, 2**32 - 1))
def test_self_evaluation_is_perfect(n, seed):
    s = _rand(n, seed)
    assert evaluate(s, [s]).as_tuple() == PERFECT


@THOUSAND
@given(mutated())
def test_strand_invariance(case):
    truth, cand = case
    assert evaluate(truth, [reverse_complement(cand)]).as_tuple() == evaluate(truth, [cand]).as_tuple()


@THOUSAND
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_contig_order_does_not_change_coverage(seed, parts):
    rnd = random.Random(seed)
    truth = _rand(1500, seed)
    cuts = sorted(rnd.sample(range(100, 1400), parts - 1))
    pieces = [truth[a:b] for a, b in zip([0, *cuts], [*cuts, 1500])]
    pieces = [p if rnd.random() < 0.5 else reverse_complement(p) for p in pieces]
    shuffled = pieces[:]
    rnd.shuffle(shuffled)
    a, b = evaluate(truth, pieces), evaluate(truth, shuffled)
    assert (a.pct_covered, a.pct_used) == (b.pct_covered, b.pct_used)


@THOUSAND
@given(mutated())
def test_segment_bookkeeping(case):
    truth, cand = case
    for seg in align(truth, cand):
        _check_segment(seg)
    rep = evaluate(truth, [cand])
    assert 0 <= rep.pct_covered <= 100 and 0 <= rep.pct_used <= 100 and 0 <= rep.pct_identity <= 100
