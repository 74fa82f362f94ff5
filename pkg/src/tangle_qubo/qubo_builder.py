"""QUBO encodings of the tangle problems.

Variables are ``x[t, slot]`` for ``t`` in ``0..T-1``. Each time step has
one slot per node (per orientation for the oriented kinds) plus a virtual
``end`` slot with no sequence. The objective is the sum of

* a one-hot penalty per time step (weight ``lambda1``),
* a transition penalty for every non-edge step and every step that leaves
  ``end`` (weight ``lambda2``); moving into or staying in ``end`` is free,
* the copy-number deviation ``sum_v (visits(v) - w(v))^2``.

Coefficients are expanded exactly with integers/fractions, so the energy
of a constraint-satisfying assignment equals the walk cost with no
rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graph_model import AnnotatedGraph, Oriented
from .tangle_problems import WalkPair

END = ("<end>", "")
Slot = tuple[str, str]


def _exact(x) -> Fraction | int:
    if isinstance(x, (int, Fraction)):
        f = Fraction(x)
    else:
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        f = Fraction(repr(float(x)))
    return int(f) if f.denominator == 1 else f


def _num(f):
    if isinstance(f, Fraction) and f.denominator == 1:
        return int(f)
    return f


def round_weight(w: float) -> int:
    if not math.isfinite(w):
        raise ValueError(f"non-finite weight {w!r}")
    return int(round(w))  # ties to even


@dataclass(frozen=True)
class VariableLayout:
    kind: str
    T: int
    alpha: float
    node_ids: tuple[str, ...]
    weights: tuple[int, ...]
    slots: tuple[Slot, ...]
    allowed: frozenset[tuple[Slot, Slot]]
    blocks: int = 1

    @property
    def slots_per_step(self) -> int:
        return len(self.slots)

    @property
    def n(self) -> int:
        return self.blocks * self.T * len(self.slots)

    @property
    def end_slot(self) -> int:
        return len(self.slots) - 1

    def index(self, t: int, slot: Slot | str, block: int = 0) -> int:
        if isinstance(slot, str):
            slot = (slot, "+")
        if slot == END:
            s = self.end_slot
        else:
            if self.kind == "tangle":
                slot = (slot[0], "+")
            s = self._slot_index[slot]
        if not 0 <= t < self.T:
            raise IndexError(f"time {t} outside 0..{self.T - 1}")
        return (block * self.T + t) * len(self.slots) + s

    def unindex(self, i: int) -> tuple[int, int, Slot]:
        per = len(self.slots)
        bt, s = divmod(i, per)
        block, t = divmod(bt, self.T)
        return block, t, self.slots[s]

    @property
    def _slot_index(self) -> dict[Slot, int]:
        cache = self.__dict__.get("_si")
        if cache is None:
            cache = {s: i for i, s in enumerate(self.slots)}
            object.__setattr__(self, "_si", cache)
        return cache

    def step_allowed(self, a: Slot, b: Slot) -> bool:
        if b == END:
            return True
        if a == END:
            return False
        return (a, b) in self.allowed

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind, "T": self.T, "alpha": self.alpha, "blocks": self.blocks,
            "node_ids": list(self.node_ids), "weights": list(self.weights),
            "slots": [list(s) for s in self.slots],
            "allowed": sorted([list(a), list(b)] for a, b in self.allowed),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "VariableLayout":
        d = json.loads(text)
        return cls(d["kind"], d["T"], d["alpha"], tuple(d["node_ids"]), tuple(d["weights"]),
                   tuple(tuple(s) for s in d["slots"]),
                   frozenset((tuple(a), tuple(b)) for a, b in d["allowed"]), d["blocks"])


@dataclass
class QuboModel:
    n: int
    linear: dict[int, int | Fraction] = field(default_factory=dict)
    quadratic: dict[tuple[int, int], int | Fraction] = field(default_factory=dict)
    offset: int | Fraction = 0
    lambda1: float = 0.0
    lambda2: float = 0.0
    layout: VariableLayout | None = None

    def add_linear(self, i: int, c) -> None:
        if c:
            v = self.linear.get(i, 0) + c
            if v:
                self.linear[i] = v
            else:
                self.linear.pop(i, None)

    def add_quadratic(self, i: int, j: int, c) -> None:
        if i == j:
            self.add_linear(i, c)  # x^2 = x
            return
        key = (i, j) if i < j else (j, i)
        if c:
            v = self.quadratic.get(key, 0) + c
            if v:
                self.quadratic[key] = v
            else:
                self.quadratic.pop(key, None)

    def add_squared(self, idx: Sequence[int], coeffs: Sequence, const, scale=1) -> None:
        """Add ``scale * (sum_k coeffs[k] * x[idx[k]] + const)^2``."""
        self.offset += scale * const * const
        for a in range(len(idx)):
            ca = coeffs[a]
            self.add_linear(idx[a], scale * (ca * ca + 2 * ca * const))
            for b in range(a + 1, len(idx)):
                self.add_quadratic(idx[a], idx[b], scale * 2 * ca * coeffs[b])

    @property
    def is_integral(self) -> bool:
        vals = [self.offset, *self.linear.values(), *self.quadratic.values()]
        return all(Fraction(v).denominator == 1 for v in vals)

    def to_dense(self) -> tuple[np.ndarray, np.ndarray]:
        """``(h, Q)`` with ``Q`` symmetric, zero diagonal, so
        E(x) = offset + h.x + x.Q.x / 2."""
        h = np.zeros(self.n)
        Q = np.zeros((self.n, self.n))
        for i, c in self.linear.items():
            h[i] = float(c)
        for (i, j), c in self.quadratic.items():
            Q[i, j] = Q[j, i] = float(c)
        return h, Q

    def to_text(self) -> str:
        kind = self.layout.kind if self.layout else "custom"
        T = self.layout.T if self.layout else 0
        lines = [f"# n={self.n} offset={self.offset} lambda1={self.lambda1} "
                 f"lambda2={self.lambda2} kind={kind} T={T}"]
        for i in sorted(self.linear):
            lines.append(f"{i} {i} {self.linear[i]}")
        for (i, j) in sorted(self.quadratic):
            lines.append(f"{i} {j} {self.quadratic[(i, j)]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, layout: VariableLayout | None = None) -> "QuboModel":
        lines = [l for l in text.splitlines() if l.strip()]
        header = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
        m = cls(int(header["n"]), offset=_num(Fraction(header["offset"])),
                lambda1=float(header["lambda1"]), lambda2=float(header["lambda2"]), layout=layout)
        for l in lines[1:]:
            i, j, c = l.split()
            c = _num(Fraction(c))
            if i == j:
                m.linear[int(i)] = c
            else:
                m.quadratic[(int(i), int(j))] = c
        return m


def energy(m: QuboModel, x: Sequence[int]):
    """Exact energy of bit vector ``x``."""
    if len(x) != m.n:
        raise ValueError(f"assignment has {len(x)} bits, model has {m.n}")
    xs = [int(b) for b in x]
    e = m.offset
    for i, c in m.linear.items():
        if xs[i]:
            e += c
    for (i, j), c in m.quadratic.items():
        if xs[i] and xs[j]:
            e += c
    return _num(e) if isinstance(e, Fraction) else e


def horizon(g: AnnotatedGraph, alpha: float) -> int:
    total = sum(round_weight(n.weight) for n in g.nodes.values())
    if total < 1:
        raise ValueError("rounded weights sum to zero; nothing to encode")
    return max(2, math.ceil(_exact(alpha) * total))


def _layout(g: AnnotatedGraph, kind: str, alpha: float, T: int | None) -> VariableLayout:
    ids = tuple(g.nodes)
    weights = tuple(round_weight(g.nodes[v].weight) for v in ids)
    if T is None:
        T = horizon(g, alpha)
    if kind == "tangle":
        slots = tuple((v, "+") for v in ids) + (END,)
        allowed = frozenset(((a, "+"), (b, "+")) for a in ids for b in ids
                            if g.has_edge((a, "+"), (b, "+")))
        blocks = 1
    else:
        slots = tuple((v, o) for v in ids for o in ("+", "-")) + (END,)
        allowed = frozenset(e for e in g.edges)
        blocks = 2 if kind == "diploid" else 1
    return VariableLayout(kind, T, alpha, ids, weights, slots, allowed, blocks)


def _build(g: AnnotatedGraph, kind: str, alpha: float, lambda1, lambda2, T: int | None = None) -> QuboModel:
    for v, n in g.nodes.items():
        if not math.isfinite(n.weight):
            raise ValueError(f"node {v!r} has non-finite weight")
    lay = _layout(g, kind, alpha, T)
    L1, L2 = _exact(lambda1), _exact(lambda2)
    m = QuboModel(lay.n, lambda1=float(lambda1), lambda2=float(lambda2), layout=lay)
    S = lay.slots_per_step
    end = lay.end_slot
    node_slots = lay.slots[:-1]

    for b in range(lay.blocks):
        base = b * lay.T * S
        # one-hot per time step
        for t in range(lay.T):
            idx = [base + t * S + s for s in range(S)]
            m.add_squared(idx, [1] * S, -1, L1)
        # transitions
        for t in range(lay.T - 1):
            cur, nxt = base + t * S, base + (t + 1) * S
            for si, a in enumerate(node_slots):
                for sj, c in enumerate(node_slots):
                    if (a, c) not in lay.allowed:
                        m.add_quadratic(cur + si, nxt + sj, L2)
            for sj in range(len(node_slots)):
                m.add_quadratic(cur + end, nxt + sj, L2)

    # copy-number deviation, summed over orientations and blocks
    for vi, v in enumerate(lay.node_ids):
        w = lay.weights[vi]
        slot_ids = [s for s, sl in enumerate(node_slots) if sl[0] == v]
        idx = [b * lay.T * S + t * S + s for b in range(lay.blocks) for t in range(lay.T) for s in slot_ids]
        m.add_squared(idx, [1] * len(idx), -w)
    m.offset = _num(Fraction(m.offset)) if isinstance(m.offset, Fraction) else m.offset
    return m


def build_tangle_qubo(g: AnnotatedGraph, alpha: float = 1.2, lambda1=10, lambda2=5, T: int | None = None) -> QuboModel:
    return _build(g, "tangle", alpha, lambda1, lambda2, T)


def build_oriented_qubo(g: AnnotatedGraph, alpha: float = 1.2, lambda1=10, lambda2=5, T: int | None = None) -> QuboModel:
    return _build(g, "oriented", alpha, lambda1, lambda2, T)


def build_diploid_qubo(g: AnnotatedGraph, alpha: float = 1.2, lambda1=10, lambda2=5, T: int | None = None) -> QuboModel:
    return _build(g, "diploid", alpha, lambda1, lambda2, T)


def build_qubo(g: AnnotatedGraph, kind: str, **kw) -> QuboModel:
    builders = {"tangle": build_tangle_qubo, "oriented": build_oriented_qubo, "diploid": build_diploid_qubo}
    if kind not in builders:
        raise ValueError(f"unknown problem kind {kind!r}")
    return builders[kind](g, **kw)


def encode_walk(layout: VariableLayout, walk) -> list[int]:
    """Bit vector with one slot set per time step: the visits, then ``end``."""
    if layout.kind == "diploid":
        walks = list(walk) if isinstance(walk, (WalkPair, tuple)) else None
        if walks is None or len(walks) != 2:
            raise ValueError("diploid layout needs a pair of walks")
    else:
        walks = [walk]
    x = [0] * layout.n
    for b, w in enumerate(walks):
        if len(w) > layout.T:
            raise ValueError(f"walk of length {len(w)} exceeds horizon T={layout.T}")
        for t in range(layout.T):
            slot = tuple(w[t]) if t < len(w) else END
            x[layout.index(t, slot, b)] = 1
    return x
