import pytest

from tangle_qubo.assembly import extract_sequence
from tangle_qubo.graph_model import mirror
from tangle_qubo.pangenome import build_pangenome
from tangle_qubo.synthgen import EventRates, EventSizes, MutationConfig, generate_population
from tangle_qubo.tangle_problems import is_valid_walk


def _population(seed, size=5):
    cfg = MutationConfig(EventRates(point=0.01, repeat_short=0.7, cnv_dup=0.2, inversion=0.1),
                         EventRates(point=0.002, inversion=0.05),
                         sizes=EventSizes(repeat_short=(100, 300), cnv=(100, 400), inversion=(100, 300)),
                         population_size=size, generations=1)
    return [(g.id, g.sequence) for g in generate_population(cfg, 3000, seed)]


@pytest.mark.parametrize("seed", range(5))
def test_paths_spell_genomes(seed):
    genomes = _population(seed)
    pg = build_pangenome(genomes, k=31, seed=seed)
    for gid, seq in genomes:
        path = pg.paths[gid]
        assert extract_sequence(pg.graph, path) == seq
        assert is_valid_walk(pg.graph, path)[0]


def test_edges_are_mirrored_and_counted():
    genomes = _population(1)
    pg = build_pangenome(genomes, k=31)
    for e in pg.graph.edges:
        assert mirror(e) in pg.graph.edges
    assert sum(len(p) - 1 for p in pg.paths.values()) <= sum(pg.graph.edges.values())


def test_identical_genomes_share_path():
    seq = _population(2, size=2)[0][1]
    pg = build_pangenome([("a", seq), ("b", seq)], k=31)
    assert pg.paths["a"] == pg.paths["b"]
    assert all(c % 2 == 0 for c in pg.graph.edges.values())


def test_bubble_popping_keeps_training_sequences_as_variants():
    genomes = _population(3)
    popped = build_pangenome(genomes, k=31, pop_bubbles=True)
    plain = build_pangenome(genomes, k=31)
    assert len(popped.graph.nodes) < len(plain.graph.nodes)
    assert popped.variants
    for v, seqs in popped.variants.items():
        assert v in popped.graph.nodes
        assert popped.graph.nodes[v].sequence not in seqs
    for gid, _ in genomes:
        assert is_valid_walk(popped.graph, popped.paths[gid])[0]


@pytest.mark.parametrize("k", [2, 1, 30])
def test_even_or_tiny_k_rejected(k):
    with pytest.raises(ValueError):
        build_pangenome([("a", "ACGT" * 20)], k=k)


def test_n_in_genome_rejected():
    with pytest.raises(ValueError, match="N"):
        build_pangenome([("a", "ACGTN" * 20)], k=5)
