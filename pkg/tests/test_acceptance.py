"""Acceptance criteria A1-A8. Each test prints one PASS/FAIL line."""

import random
import statistics
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from tangle_qubo.assembly import DecodeError, decode
from tangle_qubo.classical_solvers import SolverParams, solve_anneal, solve_exhaustive_bits, solve_exhaustive_walks, solve_tabu
from tangle_qubo.cli import cmd_pipeline, load_config
from tangle_qubo.gfa_io import read_gfa
from tangle_qubo.graph_model import NodeRecord, build_graph, trim_zero_weight_edges
from tangle_qubo.qaoa_simulator import optimize_qaoa, qubo_to_ising
from tangle_qubo.qubo_builder import build_qubo, build_tangle_qubo, encode_walk, energy, horizon
from tangle_qubo.tangle_problems import WalkPair, cost

P = "+"


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def _random_walk(g, rng, max_len, forward_only):
    n = rng.randint(0, max_len)
    if n == 0:
        return []
    starts = [(v, o) for v in g.nodes for o in ("+" if forward_only else "+-")]
    walk = [rng.choice(starts)]
    while len(walk) < n:
        nxt = [s for s in g.successors(walk[-1]) if not forward_only or s[1] == P]
        if not nxt:
            break
        walk.append(rng.choice(nxt))
    return walk


def _random_graph(rng, max_nodes, forward_only, edge_p=0.35):
    ids = [f"v{i}" for i in range(rng.randint(1, max_nodes))]
    weights = [rng.randint(0, 3) for _ in ids]
    if not any(weights):
        weights[0] = 1
    nodes = [NodeRecord(v, "ACGT", weight=float(w)) for v, w in zip(ids, weights)]
    ends = [(v, o) for v in ids for o in ("+" if forward_only else "+-")]
    links = [(a, b) for a in ends for b in ends if rng.random() < edge_p]
    return build_graph(nodes, links, k=3)


def test_a1_encoding_faithfulness(report):
    rng = random.Random(1)
    t0 = time.perf_counter()
    checked = mismatches = 0
    for i in range(200):
        kind = ("tangle", "oriented", "diploid")[i % 3]
        g = _random_graph(rng, 6, kind == "tangle")
        m = build_qubo(g, kind)
        for _ in range(10):
            w = _random_walk(g, rng, m.layout.T, kind == "tangle")
            if kind == "diploid":
                w = WalkPair(tuple(w), tuple(_random_walk(g, rng, m.layout.T, False)))
            mismatches += energy(m, encode_walk(m.layout, w)) != cost(g, kind, w)
            checked += 1
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and secs < 30
    report("A1", ok, f"{checked} walks, {mismatches} mismatches, {secs:.1f}s")
    assert ok


def _tangle_instances():
    rng = random.Random(7)
    out = []
    while len(out) < 50:
        g = _random_graph(rng, 5, True, edge_p=0.4)
        # small enough to enumerate, large enough to be a real search
        if 12 <= (len(g.nodes) + 1) * horizon(g, 1.2) <= 22:
            out.append(g)
    return out


@pytest.fixture(scope="module")
def tangle_suite():
    """Instances with their exact optimum from walk enumeration."""
    return [(g, build_tangle_qubo(g), solve_exhaustive_walks(g, "tangle", horizon(g, 1.2)).cost)
            for g in _tangle_instances()]


def test_a2_penalty_dominance(tangle_suite, report):
    t0 = time.perf_counter()
    failures = []
    total = 0
    for i, (g, m, best) in enumerate(tangle_suite):
        res = solve_exhaustive_bits(m, collect_minimisers=True)
        if res.best_energy != best:
            failures.append((i, "energy", res.best_energy, best))
        for x in res.minimisers:
            total += 1
            try:
                walk = decode(m.layout, x, "strict").walk
            except DecodeError as exc:
                failures.append((i, "decode", str(exc)))
                continue
            if cost(g, "tangle", walk) != best:
                failures.append((i, "cost", cost(g, "tangle", walk), best))
    secs = time.perf_counter() - t0
    ok = not failures and secs < 600
    report("A2", ok, f"{len(tangle_suite)} instances, {total} minimisers, {len(failures)} violations, {secs:.1f}s")
    assert ok, failures[:5]


def test_a3_heuristic_quality(tangle_suite, report):
    t0 = time.perf_counter()
    tabu = anneal = 0
    for i, (g, m, best) in enumerate(tangle_suite):
        params = SolverParams(seed=i, max_flips=10**6)
        tabu += solve_tabu(m, params).best_energy == best
        anneal += solve_anneal(m, params).best_energy == best
    secs = time.perf_counter() - t0
    n = len(tangle_suite)
    ok = tabu >= 0.95 * n and anneal >= 0.80 * n and secs < 300
    report("A3", ok, f"tabu {tabu}/{n}, anneal {anneal}/{n}, {secs:.1f}s")
    assert ok


def test_a4_qaoa_beats_random(report):
    nodes = [NodeRecord(v, "ACGT", weight=1.0) for v in "abc"]
    g = build_graph(nodes, [(("a", P), ("b", P)), (("b", P), ("c", P))], k=3)
    m = build_tangle_qubo(g)
    assert m.layout.slots_per_step == 4 and m.n <= 16
    optimum = solve_exhaustive_bits(m).best_energy
    H = qubo_to_ising(m)
    t0 = time.perf_counter()
    improved = below = exact = 0
    for seed in range(10):
        res = optimize_qaoa(m, p=2, shots=1000, max_iters=100, alpha_cvar=0.1, seed=seed)
        uniform = np.random.default_rng(10_000 + seed).integers(0, 2 ** m.n, 1000).astype(np.uint64)
        median = np.median(H.packed_energies(uniform))
        improved += res.final_cvar < res.first_cvar
        below += (res.batch.expanded_energies() < median).mean() > 0.5
        exact += res.best_energy == optimum
    secs = time.perf_counter() - t0
    ok = improved >= 9 and below >= 9 and exact >= 7 and secs < 600
    report("A4", ok, f"n={m.n}, cvar improved {improved}/10, beats random {below}/10, "
                     f"optimum {exact}/10, {secs:.1f}s")
    assert ok


def test_a5_recoverable_instance(tmp_path, report):
    overrides = [
        "seed=3", f"workdir={tmp_path}",
        "synth.population_size=4", "synth.generations=1", "synth.founder_length=3000",
        "synth.founder_rates={point: 0.01, repeat_short: 0.7, cnv_dup: 0.2}",
        "synth.descendant_rates={point: 0.0005}",
        "synth.sizes={repeat_short: [100, 300], cnv: [100, 400]}",
        "graph.training=4", "graph.pop_bubbles=false", "evaluation.genomes=[g0]",
        "annotate.oracle=true", "solver.name=oracle-walk",
    ]
    t0 = time.perf_counter()
    rep = cmd_pipeline(load_config(None, overrides))["g0"]
    secs = time.perf_counter() - t0
    nodes = len(read_gfa(tmp_path / "graph.gfa").segments)
    ok = rep.as_tuple() == (100.0, 100.0, 1, 0, 0, 0, 100.0) and secs < 60
    report("A5", ok, f"{nodes}-node graph, report {rep.as_tuple()}, {secs:.1f}s")
    assert ok


# first ten seeds whose default ten-genome graph has between 3 and 25 nodes
A6_SEEDS = [1, 4, 7, 11, 12, 15, 17, 20, 23, 25]


def test_a6_statistical_pipeline(tmp_path, report):
    t0 = time.perf_counter()
    reports, sizes = [], []
    for seed in A6_SEEDS:
        wd = tmp_path / f"s{seed}"
        cfg = load_config(None, [f"seed={seed}", f"workdir={wd}", "evaluation.genomes=[g11]",
                                 "solver.name=tabu", "solver.time_limit=60"])
        rep = cmd_pipeline(cfg)["g11"]
        reports.append(rep)
        sizes.append(len(read_gfa(wd / "graph.gfa").segments))
    secs = time.perf_counter() - t0
    identity = statistics.mean(r.pct_identity for r in reports)
    contigs = statistics.mean(r.contigs for r in reports)
    ok = identity >= 95 and contigs <= 5 and max(sizes) <= 25 and secs < 900
    report("A6", ok, f"nodes {sizes}, mean identity {identity:.2f}, mean contigs {contigs:.1f}, {secs:.0f}s")
    assert ok


def _weak_components(g):
    positive = [v for v, n in g.nodes.items() if n.weight > 0]
    pos = {v: i for i, v in enumerate(positive)}
    pairs = [(pos[a], pos[b]) for (a, _), (b, _) in g.edges if a in pos and b in pos]
    rows = [a for a, _ in pairs]
    cols = [b for _, b in pairs]
    adj = coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(len(pos), len(pos)))
    return connected_components(adj, directed=True, connection="weak")[0]


def test_a7_trim_keeps_components(report):
    rng = random.Random(5)
    t0 = time.perf_counter()
    changed = trimmed_graphs = 0
    for _ in range(100):
        ids = [f"v{i}" for i in range(rng.randint(3, 12))]
        nodes = [NodeRecord(v, "ACGT", weight=float(rng.choice([0, 1, 1, 2, 3]))) for v in ids]
        ends = [(v, o) for v in ids for o in "+-"]
        links = [(a, b, rng.choice([0, 0, 1, 5])) for a in ends for b in ends if rng.random() < 0.12]
        g = build_graph(nodes, links, k=3)
        t = trim_zero_weight_edges(g)
        changed += _weak_components(t) != _weak_components(g)
        trimmed_graphs += len(t.edges) < len(g.edges)
    secs = time.perf_counter() - t0
    ok = changed == 0 and secs < 60
    report("A7", ok, f"100 graphs, {trimmed_graphs} trimmed, {changed} component changes, {secs:.1f}s")
    assert ok and trimmed_graphs > 0


PROPERTY_SUITES = {
    "test_gfa_io.py": ["round trip"],
    "test_graph_model.py": ["involution", "mirror pairing", "trim components"],
    "test_synthgen.py": ["inversion involution", "move composition"],
    "test_kmer_annotator.py": ["strand invariance", "conservation"],
    "test_tangle_problems.py": ["non-negativity", "reversal"],
    "test_qubo_builder.py": ["encoding faithfulness", "reference polynomial"],
    "test_classical_solvers.py": ["delta vs full energy", "search space"],
    "test_qaoa_simulator.py": ["basis-energy identity", "norm preservation"],
    "test_assembly.py": ["decode round trip", "reverse complement"],
    "test_evaluator.py": ["strand invariance", "self evaluation"],
}


def test_a8_property_suites_registered(report):
    """The property tests themselves run as part of the module suites; this
    checks each module still carries thousand-case properties."""
    here = Path(__file__).parent
    counts = {name: (here / name).read_text().count("@THOUSAND") for name in PROPERTY_SUITES}
    missing = [n for n, c in counts.items() if c == 0]
    ok = not missing
    report("A8", ok, f"{sum(counts.values())} thousand-case properties across {len(counts)} modules"
                     + (f", missing in {missing}" if missing else ""))
    assert ok
