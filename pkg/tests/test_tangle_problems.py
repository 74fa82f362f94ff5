import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategies import THOUSAND, graph_and_walk
from tangle_qubo.graph_model import NodeRecord, build_graph
from tangle_qubo.tangle_problems import (InvalidWalk, WalkPair, cost, cost_diploid, cost_length_weighted,
                                         cost_oriented, cost_tangle, is_valid_walk, reverse_walk, visit_counts)

P = "+"


def _g(weights, links, lengths=None):
    lengths = lengths or {}
    nodes = [NodeRecord(v, "A" * lengths.get(v, 4), weight=float(w)) for v, w in weights.items()]
    return build_graph(nodes, [((a, P), (b, P)) if isinstance(a, str) else (a, b) for a, b in links], k=3)


ABC = _g({"a": 1, "b": 1, "c": 1}, [("a", "b")])


def test_empty_walk_valid():
    assert is_valid_walk(ABC, []) == (True, None)


def test_step_along_edge_valid():
    assert is_valid_walk(ABC, [("a", P), ("b", P)]) == (True, None)


def test_missing_edge_reported_at_index():
    assert is_valid_walk(ABC, [("a", P), ("c", P)]) == (False, 1)


def test_unknown_node():
    with pytest.raises(KeyError):
        is_valid_walk(ABC, [("zz", P)])


def test_invalid_walk_raises_in_cost():
    with pytest.raises(InvalidWalk) as exc:
        cost_oriented(ABC, [("a", P), ("c", P)])
    assert exc.value.index == 1


@pytest.mark.parametrize("visits,expected", [(2, 0), (1, 1)])
def test_tangle_single_node(visits, expected):
    g = _g({"v": 2}, [("v", "v")])
    assert cost_tangle(g, [("v", P)] * visits) == expected


def test_tangle_three_node_example_is_optimal():
    g = _g({"a": 1, "b": 2, "c": 1}, [("a", "b"), ("b", "c"), ("c", "b")])
    assert cost_tangle(g, [("a", P), ("b", P), ("c", P), ("b", P)]) == 0
    best = math.inf
    for n in range(5):
        for w in itertools.product(g.nodes, repeat=n):
            walk = [(v, P) for v in w]
            if is_valid_walk(g, walk, oriented=False)[0]:
                best = min(best, cost_tangle(g, walk))
    assert best == 0


def test_oriented_examples():
    g = _g({"v": 2}, [(("v", "+"), ("v", "-"))])
    assert cost_oriented(g, [("v", "+"), ("v", "-")]) == 0
    assert cost_oriented(_g({"v": 1}, []), [("v", "+")]) == 0
    assert cost_oriented(_g({"a": 1, "b": 1}, []), []) == 2


def test_diploid_examples():
    g = _g({"v": 2}, [])
    assert cost_diploid(g, WalkPair((("v", "+"),), (("v", "+"),))) == 0
    assert cost_diploid(_g({"a": 2, "b": 2}, []), ([], [])) == 8


def test_diploid_reports_which_walk():
    with pytest.raises(InvalidWalk) as exc:
        cost_diploid(ABC, ([("a", P)], [("a", P), ("c", P)]))
    assert exc.value.which == 2


def test_length_weighted_examples():
    g = _g({"a": 2, "b": 1}, [("a", "b")], {"a": 100, "b": 10})
    assert cost_length_weighted(g, [("a", P), ("b", P)]) == pytest.approx(math.log(100))
    perfect = _g({"a": 1, "b": 1}, [("a", "b")], {"a": 7, "b": 300})
    assert cost_length_weighted(perfect, [("a", P), ("b", P)]) == 0


def test_length_weighted_short_node_rejected():
    with pytest.raises(ValueError):
        cost_length_weighted(_g({"a": 1}, [], {"a": 1}), [])


def test_unknown_kind():
    with pytest.raises(ValueError):
        cost(ABC, "triploid", [])


@THOUSAND
@given(graph_and_walk())
def test_cost_non_negative_and_zero_iff_exact(gw):
    g, w = gw
    c = cost_oriented(g, w)
    counts = visit_counts([w])
    assert c >= 0
    assert (c == 0) == all(counts.get(v, 0) == n.weight for v, n in g.nodes.items())


@THOUSAND
@given(graph_and_walk())
def test_reversed_walk_same_cost(gw):
    g, w = gw
    r = reverse_walk(w)
    assert is_valid_walk(g, r)[0]
    assert cost_oriented(g, r) == cost_oriented(g, w)


@THOUSAND
@given(graph_and_walk())
def test_diploid_with_empty_second_walk(gw):
    g, w = gw
    assert cost_diploid(g, (w, [])) == cost_oriented(g, w)


@THOUSAND
@given(graph_and_walk(), st.data())
def test_moving_away_by_one_costs_odd_integer(gw, data):
    g, w = gw
    v = data.draw(st.sampled_from(sorted(g.nodes)))
    d = visit_counts([w]).get(v, 0) - g.nodes[v].weight
    # shifting the weight down by one is the same as one extra visit of v
    step = 1 if d >= 0 else -1
    shifted = g.with_weights({u: n.weight - (step if u == v else 0) for u, n in g.nodes.items()})
    delta = cost_oriented(shifted, w) - cost_oriented(g, w)
    assert delta > 0
    assert delta == int(delta) and int(delta) % 2 == 1
    assert delta == abs(2 * d + step)


@THOUSAND
@given(graph_and_walk())
def test_uniform_length_two_factorises(gw):
    g, w = gw
    g2 = build_graph([NodeRecord(v, "AC", weight=n.weight) for v, n in g.nodes.items()],
                     [(a, b, c) for (a, b), c in g.edges.items()], k=3)
    if not is_valid_walk(g2, w, oriented=False)[0]:
        return
    assert cost_length_weighted(g2, w) == pytest.approx(math.log(2) * cost_tangle(g2, w))
