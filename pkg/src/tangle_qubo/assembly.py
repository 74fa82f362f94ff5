"""Turn QUBO assignments back into walks and walks into sequence."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .gfa_io import render_path_string
from .graph_model import AnnotatedGraph, Oriented, reverse_complement
from .qubo_builder import END, VariableLayout
from .tangle_problems import Walk, WalkPair

__all__ = ["DecodeError", "Violation", "DecodeReport", "decode", "extract_sequence", "render_path_string"]

VIOLATION_KINDS = ("empty-time", "multi-set", "non-edge", "end-escape")


@dataclass(frozen=True)
class Violation:
    time: int
    kind: str
    block: int = 0

    def __str__(self) -> str:
        return f"block {self.block} t={self.time}: {self.kind}"


class DecodeError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        shown = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"{len(violations)} constraint violation(s): {shown}{more}")


@dataclass
class DecodeReport:
    mode: str
    segments: list[list[Walk]]  # per block, each a valid walk
    violations: list[Violation] = field(default_factory=list)

    @property
    def n_segments(self) -> int:
        return sum(len(b) for b in self.segments)

    @property
    def walks(self) -> list[Walk]:
        """Every segment of every block, in block then time order."""
        return [w for b in self.segments for w in b]

    def block_walk(self, block: int = 0) -> Walk:
        """The visits of one block joined in time order (a valid walk when
        the block has at most one segment)."""
        return [v for seg in self.segments[block] for v in seg]

    @property
    def walk(self) -> Walk:
        return self.block_walk(0)

    @property
    def pair(self) -> WalkPair:
        return WalkPair(tuple(self.block_walk(0)), tuple(self.block_walk(1)))


def _pick(candidates: list[int], layout: VariableLayout, counts: dict[str, int]) -> int:
    """Slot whose visit raises the copy-number deviation least; ``end`` adds nothing."""
    def increase(s):
        slot = layout.slots[s]
        if slot == END:
            return (0, 1, "")
        vid = slot[0]
        w = layout.weights[layout.node_ids.index(vid)]
        c = counts.get(vid, 0)
        return (2 * (c - w) + 1, 0, slot)
    return min(candidates, key=increase)


def decode(layout: VariableLayout, x: Sequence[int], mode: str = "strict") -> DecodeReport:
    if mode not in ("strict", "repair"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if len(x) != layout.n:
        raise ValueError(f"assignment has {len(x)} bits, layout expects {layout.n}")
    S = layout.slots_per_step
    violations: list[Violation] = []
    counts: dict[str, int] = {}
    blocks: list[list[Walk]] = []
    for b in range(layout.blocks):
        segs: list[Walk] = []
        cur: Walk = []
        prev = None  # slot chosen at the previous kept time step
        for t in range(layout.T):
            base = (b * layout.T + t) * S
            on = [s for s in range(S) if x[base + s]]
            if not on:
                violations.append(Violation(t, "empty-time", b))
                continue
            if len(on) > 1:
                violations.append(Violation(t, "multi-set", b))
                s = _pick(on, layout, counts)
            else:
                s = on[0]
            slot = layout.slots[s]
            if slot == END:
                if cur:
                    segs.append(cur)
                    cur = []
                prev = END
                continue
            if prev == END:
                violations.append(Violation(t, "end-escape", b))
            elif prev is not None and not layout.step_allowed(prev, slot):
                violations.append(Violation(t, "non-edge", b))
                segs.append(cur)
                cur = []
            cur.append(slot)
            counts[slot[0]] = counts.get(slot[0], 0) + 1
            prev = slot
        if cur:
            segs.append(cur)
        blocks.append(segs)
    if mode == "strict" and violations:
        raise DecodeError(violations)
    return DecodeReport(mode, blocks, violations)


def extract_sequence(g: AnnotatedGraph, w: Sequence[Oriented]) -> str:
    """Concatenate node sequences along the walk (no overlaps)."""
    parts = []
    for v, o in w:
        seq = g.nodes[v].sequence
        if not seq or seq == "*":
            raise ValueError(f"node {v!r} has no sequence")
        parts.append(seq if o == "+" else reverse_complement(seq))
    return "".join(parts)
