"""Score reconstructed contigs against the true genome.

The aligner is a small seed-chain-extend design: exact seeds are k-mers
that occur once in the truth (counting both strands), seeds are chained
co-linearly per strand, gaps between chained seeds are filled by banded
affine-gap global alignment, and chain ends are extended with a
free-end alignment. Overlapping hits on a contig are resolved greedily by
score.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .graph_model import reverse_complement

MATCH, MISMATCH, GAP_OPEN, GAP_EXTEND = 1, -2, 4, 1
BAND = 64
MAX_DIAGONAL_GAP = 100
MAX_SEED_DISTANCE = 5000
CHAIN_LOOKBACK = 50
MIN_ALIGNED = 50
MAX_OVERLAP = 0.5
WINDOW = 100
WINDOW_MISMATCHES = 30
MIN_INDEL = 10
ZDROP = 100

_NEG = -(10**9)
_CODE = np.full(256, 4, dtype=np.uint8)
for _i, _b in enumerate("ACGT"):
    _CODE[ord(_b)] = _i


def _encode(s: str) -> np.ndarray:
    return _CODE[np.frombuffer(s.encode(), dtype=np.uint8)]


@dataclass
class AlignmentSegment:
    ts: int
    te: int
    cs: int
    ce: int
    strand: str
    matches: int
    mismatches: int
    insertions: int
    deletions: int
    ops: list[tuple[str, int]] = field(repr=False)
    score: int = 0
    contig: int = 0

    def mismatch_positions(self) -> list[int]:
        """Truth coordinates of mismatched bases."""
        out = []
        t = self.ts
        for op, n in self.ops:
            if op == "X":
                out.extend(range(t, t + n))
            if op in "MXD":
                t += n
        return out

    def gap_runs(self) -> list[int]:
        return [n for op, n in self.ops if op in "ID"]


@dataclass
class EvalReport:
    pct_covered: float
    pct_used: float
    contigs: int
    breaks: int
    indels_ge10: int
    diff_regions: int
    pct_identity: float

    COLUMNS = ("Covered", "Used", "Contigs", "Breaks", "Indel", "Diff", "Identity")

    def as_tuple(self) -> tuple:
        return (self.pct_covered, self.pct_used, self.contigs, self.breaks,
                self.indels_ge10, self.diff_regions, self.pct_identity)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def to_tsv(self, header: bool = True) -> str:
        vals = [f"{self.pct_covered:.2f}", f"{self.pct_used:.2f}", str(self.contigs), str(self.breaks),
                str(self.indels_ge10), str(self.diff_regions), f"{self.pct_identity:.2f}"]
        line = "\t".join(vals)
        return ("\t".join(self.COLUMNS) + "\n" + line + "\n") if header else line + "\n"


# --- dynamic programming kernels -----------------------------------------------------

@njit(cache=True)
def _affine_dp(a, b, lo_diag, hi_diag, free_end, match, mismatch, gap_open, gap_extend):
    """Gotoh alignment of a (truth) against b (query) restricted to cells
    with lo_diag <= j - i <= hi_diag. Global unless ``free_end``, in which
    case the best-scoring cell anywhere ends the alignment.

    Returns (score, end_i, end_j, ops) with ops coded 0 diag, 1 insertion
    (consumes b), 2 deletion (consumes a), in forward order.
    """
    n, m = a.shape[0], b.shape[0]
    H = np.full((n + 1, m + 1), _NEG, dtype=np.int64)
    E = np.full((n + 1, m + 1), _NEG, dtype=np.int64)
    F = np.full((n + 1, m + 1), _NEG, dtype=np.int64)
    th = np.zeros((n + 1, m + 1), dtype=np.int8)
    te = np.zeros((n + 1, m + 1), dtype=np.int8)
    tf = np.zeros((n + 1, m + 1), dtype=np.int8)
    H[0, 0] = 0
    best, bi, bj = 0, 0, 0
    oe = gap_open + gap_extend
    for i in range(n + 1):
        jlo = max(0, i + lo_diag)
        jhi = min(m, i + hi_diag)
        for j in range(jlo, jhi + 1):
            if i == 0 and j == 0:
                continue
            if j > 0:
                o = H[i, j - 1] - oe
                x = E[i, j - 1] - gap_extend
                if x > o:
                    E[i, j] = x
                    te[i, j] = 1
                else:
                    E[i, j] = o
            if i > 0:
                o = H[i - 1, j] - oe
                x = F[i - 1, j] - gap_extend
                if x > o:
                    F[i, j] = x
                    tf[i, j] = 1
                else:
                    F[i, j] = o
            h = _NEG
            src = 0
            if i > 0 and j > 0 and H[i - 1, j - 1] > _NEG:
                s = match if (a[i - 1] == b[j - 1] and a[i - 1] < 4) else mismatch
                h = H[i - 1, j - 1] + s
            if E[i, j] > h:
                h = E[i, j]
                src = 1
            if F[i, j] > h:
                h = F[i, j]
                src = 2
            H[i, j] = h
            th[i, j] = src
            if free_end and h > best:
                best, bi, bj = h, i, j
    if not free_end:
        bi, bj = n, m
        best = H[n, m]
    ops = np.empty(n + m, dtype=np.int8)
    k = 0
    i, j = bi, bj
    state = 0
    while i > 0 or j > 0:
        if state == 0:
            src = th[i, j]
            if src == 0:
                ops[k] = 0
                k += 1
                i -= 1
                j -= 1
            else:
                state = src
        elif state == 1:
            ops[k] = 1
            k += 1
            ext = te[i, j]
            j -= 1
            state = 1 if ext else 0
        else:
            ops[k] = 2
            k += 1
            ext = tf[i, j]
            i -= 1
            state = 2 if ext else 0
    return best, bi, bj, ops[:k][::-1].copy()


@njit(cache=True)
def _chain_dp(t, q, k, max_diag, max_dist, lookback):
    n = t.shape[0]
    f = np.zeros(n, dtype=np.float64)
    parent = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        f[i] = k
        stop = max(-1, i - lookback - 1)
        for j in range(i - 1, stop, -1):
            dt = t[i] - t[j]
            if dt > max_dist:
                break
            dq = q[i] - q[j]
            if dt <= 0 or dq <= 0:
                continue
            dd = abs(dt - dq)
            if dd > max_diag:
                continue
            gain = min(min(dt, dq), k)
            cost = 0.0 if dd == 0 else 0.01 * k * dd + 0.5 * math.log2(dd)
            s = f[j] + gain - cost
            if s > f[i]:
                f[i] = s
                parent[i] = j
    return f, parent


# --- alignment assembly ----------------------------------------------------------------

def _ops_from_codes(codes, a, b) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    i = j = 0
    for c in codes:
        if c == 0:
            op = "M" if (a[i] == b[j] and a[i] < 4) else "X"
            i += 1
            j += 1
        elif c == 1:
            op = "I"
            j += 1
        else:
            op = "D"
            i += 1
        if out and out[-1][0] == op:
            out[-1] = (op, out[-1][1] + 1)
        else:
            out.append((op, 1))
    return out


def _push(ops: list, op: str, n: int) -> None:
    if n <= 0:
        return
    if ops and ops[-1][0] == op:
        ops[-1] = (op, ops[-1][1] + n)
    else:
        ops.append((op, n))


def _global(a, b) -> list[tuple[str, int]]:
    if len(a) == 0:
        return [("I", len(b))] if len(b) else []
    if len(b) == 0:
        return [("D", len(a))]
    d = len(b) - len(a)
    _, _, _, codes = _affine_dp(a, b, min(0, d) - BAND, max(0, d) + BAND, False,
                                MATCH, MISMATCH, GAP_OPEN, GAP_EXTEND)
    return _ops_from_codes(codes, a, b)


def _extend(a, b) -> tuple[int, int, list[tuple[str, int]]]:
    """Free-end extension from the origin; returns bases used of a and b."""
    if len(a) == 0 or len(b) == 0:
        return 0, 0, []
    _, i, j, codes = _affine_dp(a, b, -BAND, BAND, True, MATCH, MISMATCH, GAP_OPEN, GAP_EXTEND)
    return i, j, _ops_from_codes(codes, a[:i], b[:j])


def _seed_index(truth: str, k: int) -> dict[str, int]:
    counts: dict[str, int] = {}
    first: dict[str, int] = {}
    for i in range(len(truth) - k + 1):
        kmer = truth[i:i + k]
        if "N" in kmer:
            continue
        rc = reverse_complement(kmer)
        canon = min(kmer, rc)
        counts[canon] = counts.get(canon, 0) + 1
        first.setdefault(kmer, i)
    return {kmer: pos for kmer, pos in first.items() if counts[min(kmer, reverse_complement(kmer))] == 1}


def _chains(anchors_t: np.ndarray, anchors_q: np.ndarray, k: int) -> list[list[int]]:
    order = np.lexsort((anchors_q, anchors_t))
    t, q = anchors_t[order], anchors_q[order]
    f, parent = _chain_dp(t, q, k, MAX_DIAGONAL_GAP, MAX_SEED_DISTANCE, CHAIN_LOOKBACK)
    used = np.zeros(len(t), dtype=bool)
    chains = []
    for end in np.argsort(-f, kind="stable"):
        if used[end]:
            continue
        chain = []
        i = end
        while i >= 0 and not used[i]:
            chain.append(i)
            used[i] = True
            i = parent[i]
        chain.reverse()
        chains.append([(int(t[c]), int(q[c])) for c in chain])
    return chains


def _max_drop(ops) -> int:
    """Largest fall of the running score below its running maximum."""
    run = peak = drop = 0
    for op, n in ops:
        if op == "M":
            run += MATCH * n
        elif op == "X":
            run += MISMATCH * n
        else:
            run -= GAP_OPEN + GAP_EXTEND * n
        peak = max(peak, run)
        drop = max(drop, peak - run)
    return drop


def _pieces_from_chain(chain, ta: np.ndarray, qa: np.ndarray, k: int) -> list[tuple[int, int, int, int, list]]:
    """Fill the chain into alignments, splitting wherever a filled gap
    scores like unrelated sequence, then extend the outer ends."""
    pieces = []
    t0, q0 = chain[0]
    t_end, q_end = t0 + k, q0 + k
    ops: list[tuple[str, int]] = [("M", k)]
    for t, q in chain[1:]:
        if t - q == t_end - q_end and t <= t_end:
            _push(ops, "M", t + k - t_end)
            t_end, q_end = t + k, q + k
            continue
        if t < t_end or q < q_end:
            continue  # overlaps what is already aligned on another diagonal
        fill = _global(ta[t_end:t], qa[q_end:q])
        if _max_drop(fill) > ZDROP:
            pieces.append([t0, t_end, q0, q_end, ops])
            t0, q0, ops = t, q, []
        else:
            for op, n in fill:
                _push(ops, op, n)
        _push(ops, "M", k)
        t_end, q_end = t + k, q + k
    pieces.append([t0, t_end, q0, q_end, ops])

    out = []
    for i, (t0, t_end, q0, q_end, ops) in enumerate(pieces):
        # extensions stop at neighbouring pieces of the same chain
        q_lo = pieces[i - 1][3] if i else 0
        q_hi = pieces[i + 1][2] if i + 1 < len(pieces) else len(qa)
        reach = q0 - q_lo + BAND
        li, lj, lops = _extend(ta[max(0, t0 - reach):t0][::-1].copy(), qa[q_lo:q0][::-1].copy())
        reach = q_hi - q_end + BAND
        ri, rj, rops = _extend(ta[t_end:t_end + reach].copy(), qa[q_end:q_hi].copy())
        full: list[tuple[str, int]] = []
        for op, n in reversed(lops):
            _push(full, op, n)
        for op, n in ops + rops:
            _push(full, op, n)
        out.append((t0 - li, t_end + ri, q0 - lj, q_end + rj, full))
    return out


def _score(ops) -> int:
    s = 0
    for op, n in ops:
        if op == "M":
            s += MATCH * n
        elif op == "X":
            s += MISMATCH * n
        else:
            s -= GAP_OPEN + GAP_EXTEND * n
    return s


def align(truth: str, candidate: str, seed_k: int = 31, contig: int = 0,
          _seeds: dict[str, int] | None = None) -> list[AlignmentSegment]:
    """Primary and supplementary alignments of ``candidate`` against ``truth``."""
    if not truth or not candidate:
        return []
    truth, candidate = truth.upper(), candidate.upper()
    seeds = _seeds if _seeds is not None else _seed_index(truth, seed_k)
    ta = _encode(truth)
    hits = []
    for strand, query in (("+", candidate), ("-", reverse_complement(candidate))):
        at, aq = [], []
        for j in range(len(query) - seed_k + 1):
            pos = seeds.get(query[j:j + seed_k])
            if pos is not None:
                at.append(pos)
                aq.append(j)
        if not at:
            continue
        qa = _encode(query)
        for chain in _chains(np.array(at, dtype=np.int64), np.array(aq, dtype=np.int64), seed_k):
            for ts, te, qs, qe, ops in _pieces_from_chain(chain, ta, qa, seed_k):
                hits.append((strand, ts, te, qs, qe, ops))

    n = len(candidate)
    segs = []
    for strand, ts, te, qs, qe, ops in hits:
        cs, ce = (qs, qe) if strand == "+" else (n - qe, n - qs)
        cnt = {o: 0 for o in "MXID"}
        for op, L in ops:
            cnt[op] += L
        segs.append(AlignmentSegment(ts, te, cs, ce, strand, cnt["M"], cnt["X"], cnt["I"], cnt["D"],
                                     ops, _score(ops), contig))
    # greedy primary/supplementary selection; ties broken in a strand-free way
    segs.sort(key=lambda s: (-s.score, s.ts, s.te, min(s.cs, n - s.ce)))
    chosen: list[AlignmentSegment] = []
    for s in segs:
        if s.matches + s.mismatches < MIN_ALIGNED:
            continue
        length = s.ce - s.cs
        if any(_overlap(s.cs, s.ce, c.cs, c.ce) > MAX_OVERLAP * length for c in chosen):
            continue
        chosen.append(s)
    chosen.sort(key=lambda s: (s.cs, s.ce))
    return chosen


def _overlap(a0, a1, b0, b1) -> int:
    return max(0, min(a1, b1) - max(a0, b0))


def _union_length(intervals) -> int:
    total = 0
    end = -1
    for s, e in sorted(intervals):
        if e <= end:
            continue
        total += e - max(s, end)
        end = e
    return total


def _diff_regions(truth_len: int, segments: list[AlignmentSegment]) -> int:
    if truth_len == 0:
        return 0
    mism = np.zeros(truth_len, dtype=np.int64)
    for s in segments:
        for p in s.mismatch_positions():
            mism[p] += 1
    if truth_len < WINDOW:
        return int(mism.sum() >= WINDOW_MISMATCHES * truth_len / WINDOW)
    csum = np.concatenate([[0], np.cumsum(mism)])
    counts = csum[WINDOW:] - csum[:-WINDOW]
    hot = counts >= WINDOW_MISMATCHES
    # windows starting at i cover [i, i + WINDOW); overlapping hot windows merge
    regions = 0
    last_end = -1
    for i in np.flatnonzero(hot):
        if i >= last_end:
            regions += 1
        last_end = max(last_end, i + WINDOW)
    return regions


def report(truth_len: int, contig_lengths: list[int], segments: list[AlignmentSegment]) -> EvalReport:
    total_used = sum(contig_lengths)
    covered = _union_length((s.ts, s.te) for s in segments)
    used = 0
    for ci in range(len(contig_lengths)):
        used += _union_length((s.cs, s.ce) for s in segments if s.contig == ci)
    m = sum(s.matches for s in segments)
    x = sum(s.mismatches for s in segments)
    gaps = sum(s.insertions + s.deletions for s in segments)
    identity = 100.0 * m / (m + x + gaps) if m + x + gaps else 0.0
    return EvalReport(
        pct_covered=100.0 * covered / truth_len if truth_len else 0.0,
        pct_used=100.0 * used / total_used if total_used else 0.0,
        contigs=len(contig_lengths),
        breaks=max(0, len(segments) - len(contig_lengths)),
        indels_ge10=sum(1 for s in segments for n in s.gap_runs() if n >= MIN_INDEL),
        diff_regions=_diff_regions(truth_len, segments),
        pct_identity=identity,
    )


def evaluate(truth: str, contigs: list[str], seed_k: int = 31) -> EvalReport:
    truth = truth.upper()
    seeds = _seed_index(truth, seed_k)
    segments = []
    for ci, c in enumerate(contigs):
        segments += align(truth, c, seed_k, contig=ci, _seeds=seeds)
    return report(len(truth), [len(c) for c in contigs], segments)
