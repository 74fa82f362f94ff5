"""Walks on an annotated graph and the objectives they are scored by.

Three problem kinds share one representation: a walk is a list of
``(node, orientation)`` visits. For the unoriented ``tangle`` kind the
orientation is ignored and steps are checked against the forward-strand
edges ``(u, +) -> (v, +)``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .graph_model import AnnotatedGraph, Oriented, flip

Walk = list[Oriented]

KINDS = ("tangle", "oriented", "diploid")


class InvalidWalk(ValueError):
    def __init__(self, index: int, message: str, which: int | None = None):
        self.index = index
        self.which = which
        prefix = f"walk {which}: " if which is not None else ""
        super().__init__(f"{prefix}step {index}: {message}")


@dataclass(frozen=True)
class WalkPair:
    w1: tuple[Oriented, ...]
    w2: tuple[Oriented, ...]

    def __iter__(self):
        yield list(self.w1)
        yield list(self.w2)


def step_allowed(g: AnnotatedGraph, a: Oriented, b: Oriented, oriented: bool = True) -> bool:
    if oriented:
        return g.has_edge(a, b)
    return g.has_edge((a[0], "+"), (b[0], "+"))


def is_valid_walk(g: AnnotatedGraph, w: Sequence[Oriented], oriented: bool = True) -> tuple[bool, int | None]:
    """Return ``(True, None)`` or ``(False, i)`` where step ``i`` is the first bad one.

    Raises ``KeyError`` for a node id the graph does not know.
    """
    for v, o in w:
        if v not in g.nodes:
            raise KeyError(f"unknown node {v!r}")
        if o not in ("+", "-"):
            raise ValueError(f"bad orientation {o!r}")
    for i in range(1, len(w)):
        if not step_allowed(g, w[i - 1], w[i], oriented):
            return False, i
    return True, None


def _require_valid(g, w, oriented, which=None):
    ok, i = is_valid_walk(g, w, oriented)
    if not ok:
        raise InvalidWalk(i, f"no edge {w[i - 1]} -> {w[i]}", which)


def visit_counts(walks: Iterable[Sequence[Oriented]]) -> Counter:
    c: Counter = Counter()
    for w in walks:
        c.update(v for v, _ in w)
    return c


def _deviation_cost(g: AnnotatedGraph, counts: Counter, scale=None) -> float:
    total = 0.0
    for v, n in g.nodes.items():
        d = counts.get(v, 0) - n.weight
        total += (scale[v] if scale else 1.0) * d * d
    return total


def cost_tangle(g: AnnotatedGraph, w: Sequence[Oriented]) -> float:
    """Sum over nodes of (visits - weight)^2, orientation ignored."""
    _require_valid(g, w, oriented=False)
    return _deviation_cost(g, visit_counts([w]))


def cost_oriented(g: AnnotatedGraph, w: Sequence[Oriented]) -> float:
    _require_valid(g, w, oriented=True)
    return _deviation_cost(g, visit_counts([w]))


def cost_diploid(g: AnnotatedGraph, pair: WalkPair | tuple) -> float:
    w1, w2 = pair
    _require_valid(g, w1, True, which=1)
    _require_valid(g, w2, True, which=2)
    return _deviation_cost(g, visit_counts([w1, w2]))


def cost_length_weighted(g: AnnotatedGraph, w: Sequence[Oriented]) -> float:
    """Like :func:`cost_tangle` but each node's term is scaled by ln L(v)."""
    for v, n in g.nodes.items():
        if n.length < 2:
            raise ValueError(f"node {v!r} has length {n.length}; need >= 2 for a positive log")
    _require_valid(g, w, oriented=False)
    scale = {v: math.log(n.length) for v, n in g.nodes.items()}
    return _deviation_cost(g, visit_counts([w]), scale)


def cost(g: AnnotatedGraph, kind: str, walk) -> float:
    if kind == "tangle":
        return cost_tangle(g, walk)
    if kind == "oriented":
        return cost_oriented(g, walk)
    if kind == "diploid":
        return cost_diploid(g, walk)
    raise ValueError(f"unknown problem kind {kind!r}")


def reverse_walk(w: Sequence[Oriented]) -> Walk:
    """The same walk read along the opposite strand."""
    return [(v, flip(o)) for v, o in reversed(w)]
