"""Classical solvers: two exhaustive oracles, tabu search and simulated annealing."""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph_model import AnnotatedGraph, Oriented
from .qubo_builder import QuboModel, energy
from .tangle_problems import WalkPair, cost

MAX_EXHAUSTIVE_BITS = 26
MAX_WALK_EXPANSIONS = 10**8
_TRACE_CAP = 4096


@dataclass
class SolverParams:
    time_limit: float = 5.0
    seed: int = 0
    restarts: int = 10
    tabu_tenure: int | None = None
    t_start: float | None = None
    t_end: float | None = None
    sweeps: int | None = None
    max_flips: int | None = None  # budget mode: total flips over all restarts

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tabu_tenure is not None and self.tabu_tenure < 1:
            raise ValueError("tabu_tenure must be >= 1")
        if self.t_end is not None and self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.t_start is not None and self.t_end is not None and self.t_start < self.t_end:
            raise ValueError("t_start must be >= t_end")


@dataclass(frozen=True)
class TracePoint:
    elapsed: float = field(compare=False)
    flips: int
    energy: float


@dataclass
class SolveResult:
    best_x: list[int]
    best_energy: int | float
    trace: list[TracePoint]
    restarts_completed: int
    seed: int
    minimisers: list[list[int]] | None = field(default=None, compare=False, repr=False)
    n_minimisers: int | None = field(default=None, compare=False)

    def to_json(self) -> str:
        bits = "".join(str(b) for b in self.best_x)
        packed = int(bits[::-1], 2) if bits else 0
        return json.dumps({
            "n": len(self.best_x),
            "best_x_hex": format(packed, "x"),
            "best_energy": float(self.best_energy),
            "trace": [[p.elapsed, p.flips, p.energy] for p in self.trace],
            "restarts_completed": self.restarts_completed,
            "seed": self.seed,
        })

    @staticmethod
    def bits_from_hex(hex_str: str, n: int) -> list[int]:
        v = int(hex_str, 16)
        return [(v >> i) & 1 for i in range(n)]


def _code_to_bits(code: int, n: int) -> list[int]:
    return [(int(code) >> i) & 1 for i in range(n)]


def _finish(m: QuboModel, x, trace, restarts, seed) -> SolveResult:
    bits = [int(b) for b in x]
    return SolveResult(bits, energy(m, bits), trace, restarts, seed)


def _is_trivial(m: QuboModel) -> bool:
    return not m.linear and not m.quadratic


# --- exhaustive over assignments ---------------------------------------------

def solve_exhaustive_bits(m: QuboModel, collect_minimisers: bool = False, max_collect: int = 4096) -> SolveResult:
    """Global minimum by Gray-code enumeration of all 2^n assignments."""
    if m.n > MAX_EXHAUSTIVE_BITS:
        raise ValueError(f"n={m.n} exceeds the exhaustive limit of {MAX_EXHAUSTIVE_BITS}")
    t0 = time.perf_counter()
    if _is_trivial(m):
        res = _finish(m, [0] * m.n, [TracePoint(0.0, 0, float(m.offset))], 1, 0)
        if collect_minimisers:
            res.n_minimisers = 2 ** m.n
        return res
    h, Q = m.to_dense()
    best, code, found, nfound = _kernels.gray_enumerate(h, Q, float(m.offset), collect_minimisers, max_collect)
    res = _finish(m, _code_to_bits(code, m.n), [TracePoint(time.perf_counter() - t0, 2 ** m.n, best)], 1, 0)
    if collect_minimisers:
        res.minimisers = [_code_to_bits(c, m.n) for c in found]
        res.n_minimisers = int(nfound)
    return res


# --- exhaustive over walks ----------------------------------------------------

@dataclass
class WalkSolution:
    walk: list[Oriented] | WalkPair
    cost: float
    expansions: int


def _search_space(g: AnnotatedGraph, kind: str, T: int) -> float:
    """Number of walks of length at most T (pairs of them for diploid)."""
    if kind == "tangle":
        states = [(v, "+") for v in sorted(g.nodes)]
    else:
        states = [(v, o) for v in sorted(g.nodes) for o in ("+", "-")]
    pos = {s: i for i, s in enumerate(states)}
    adj = np.zeros((len(states), len(states)))
    for a, b in g.edges:
        if a in pos and b in pos:
            adj[pos[a], pos[b]] = 1.0
    ending = np.ones(len(states))  # walks of the current length ending at each state
    total = 1.0
    for _ in range(T):
        total += ending.sum()
        ending = ending @ adj
    return total ** 2 if kind == "diploid" else total


def solve_exhaustive_walks(g: AnnotatedGraph, kind: str, T: int, max_expansions: int = MAX_WALK_EXPANSIONS) -> WalkSolution:
    """Optimal walk (or pair) of length <= T by branch and bound.

    The bound adds, to the squared excess already committed, one unit for
    every unit of remaining deficit that cannot be covered in the steps
    left.
    """
    if kind not in ("tangle", "oriented", "diploid"):
        raise ValueError(f"unknown problem kind {kind!r}")
    space = _search_space(g, kind, T)
    if space > max_expansions:
        raise ValueError(f"walk search space of {space:.3g} walks exceeds the limit {max_expansions:.3g}")

    ids = sorted(g.nodes)
    w = {v: g.nodes[v].weight for v in ids}
    counts = {v: 0 for v in ids}
    oriented = kind != "tangle"
    if oriented:
        starts = [(v, o) for v in ids for o in ("+", "-")]
    else:
        starts = [(v, "+") for v in ids]

    def succ(a: Oriented):
        if oriented:
            return g.successors(a)
        return [b for b in g.successors(a) if b[1] == "+"]

    def current_cost():
        return sum((counts[v] - w[v]) ** 2 for v in ids)

    def bound(steps_left):
        excess = 0.0
        deficit = 0.0
        for v in ids:
            d = counts[v] - w[v]
            if d > 0:
                excess += d * d
            else:
                deficit -= d
        return excess + max(0.0, deficit - steps_left)

    n_walks = 2 if kind == "diploid" else 1
    walks: list[list[Oriented]] = [[] for _ in range(n_walks)]
    best = {"cost": current_cost(), "walks": [[] for _ in range(n_walks)]}
    expansions = 0

    def steps_left(which):
        return (T - len(walks[which])) + T * (n_walks - 1 - which)

    def dfs(which: int):
        nonlocal expansions
        expansions += 1
        if expansions > max_expansions:
            raise RuntimeError("walk search exceeded its expansion limit")
        c = current_cost()
        if c < best["cost"] - 1e-12:
            best["cost"] = c
            best["walks"] = [list(x) for x in walks]
        if best["cost"] <= 0:
            return
        cur = walks[which]
        if len(cur) < T:
            cands = starts if not cur else succ(cur[-1])
            # nodes furthest below their weight first
            for s in sorted(cands, key=lambda s: (counts[s[0]] - w[s[0]], s)):
                counts[s[0]] += 1
                cur.append(s)
                if bound(steps_left(which)) < best["cost"] - 1e-12:
                    dfs(which)
                cur.pop()
                counts[s[0]] -= 1
                if best["cost"] <= 0:
                    return
        if which + 1 < n_walks and cur:
            dfs(which + 1)

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * T + 100))
    try:
        dfs(0)
    finally:
        sys.setrecursionlimit(limit)

    if kind == "diploid":
        sol = WalkPair(tuple(best["walks"][0]), tuple(best["walks"][1]))
    else:
        sol = best["walks"][0]
    return WalkSolution(sol, cost(g, kind, sol), expansions)


# --- heuristics ---------------------------------------------------------------

def _restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(restart,)))


def _budget_split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if r < extra else 0) for r in range(parts)]


def default_tenure(n: int) -> int:
    return max(10, n // 10)


class _Tracker:
    """Best assignment across restarts, with a non-increasing trace."""

    def __init__(self, t0: float):
        self.t0 = t0
        self.best_x: np.ndarray | None = None
        self.best_x_e = math.inf
        self.trace_e = math.inf
        self.trace: list[TracePoint] = []

    def note(self, flips: int, e: float) -> None:
        if e < self.trace_e - 1e-9:
            self.trace_e = e
            self.trace.append(TracePoint(time.perf_counter() - self.t0, int(flips), float(e)))

    def end_restart(self, x: np.ndarray, e: float, flips: int) -> None:
        # ties keep the lowest restart index
        if self.best_x is None or e < self.best_x_e - 1e-9:
            self.best_x = x.copy()
            self.best_x_e = e
        self.note(flips, e)


def _dense_energy(m: QuboModel, h, Q, x) -> float:
    return float(m.offset) + float(h @ x) + 0.5 * float(x @ Q @ x)


def solve_tabu(m: QuboModel, p: SolverParams) -> SolveResult:
    """Multistart 1-flip tabu search with aspiration.

    With ``p.max_flips`` set, each restart gets an equal share of the flip
    budget and the run is fully determined by ``(model, params)``.
    Otherwise restarts share ``p.time_limit`` equally.
    """
    t0 = time.perf_counter()
    if _is_trivial(m) or m.n == 0:
        return _finish(m, [0] * m.n, [TracePoint(0.0, 0, float(m.offset))], 0, p.seed)
    h, Q = m.to_dense()
    n = m.n
    tenure = min(p.tabu_tenure or default_tenure(n), max(1, n - 1))
    budgets = _budget_split(p.max_flips, p.restarts) if p.max_flips is not None else None
    slice_time = p.time_limit / p.restarts
    chunk = max(50, min(20000, 20_000_000 // n))  # keeps time checks frequent on large models

    best = _Tracker(t0)
    flips_done = 0
    completed = 0
    for r in range(p.restarts):
        rng = _restart_rng(p.seed, r)
        x = rng.integers(0, 2, n).astype(np.int8)
        f = _kernels.local_field(h, Q, x)
        e = _dense_energy(m, h, Q, x)
        tabu_until = np.zeros(n, dtype=np.int64)
        r_best_x = x.copy()
        r_best_e = e
        tr_it = np.zeros(_TRACE_CAP, dtype=np.int64)
        tr_e = np.zeros(_TRACE_CAP)
        it = 0
        r_start = time.perf_counter()
        while True:
            if budgets is not None:
                step = min(chunk, budgets[r] - it)
                if step <= 0:
                    break
            else:
                if time.perf_counter() - r_start >= slice_time:
                    break
                step = chunk
            e, r_best_e, it, ntr = _kernels.tabu_run(h, Q, x, f, e, tabu_until, it, step, tenure,
                                                     r_best_x, r_best_e, tr_it, tr_e, 0,
                                                     int(rng.integers(0, 2**31)))
            for k in range(ntr):
                best.note(flips_done + int(tr_it[k]), float(tr_e[k]))
            # resynchronise the incremental state
            f = _kernels.local_field(h, Q, x)
            e = _dense_energy(m, h, Q, x)
        best.end_restart(r_best_x, r_best_e, flips_done + it)
        flips_done += it
        completed += 1
    return _finish(m, best.best_x, best.trace, completed, p.seed)


def _auto_temperatures(h: np.ndarray, Q: np.ndarray) -> tuple[float, float]:
    scale = float(np.max(np.abs(h) + 0.5 * np.abs(Q).sum(axis=1)))
    nz = np.abs(np.concatenate([h[h != 0], Q[Q != 0]]))
    smallest = float(nz.min()) if nz.size else 1.0
    return max(scale, smallest), smallest / 10.0


def solve_anneal(m: QuboModel, p: SolverParams) -> SolveResult:
    """Single-flip Metropolis annealing with a geometric schedule.

    Each restart runs ``sweeps`` sweeps (or its share of ``max_flips``, one
    sweep being n flip attempts) cooling from ``t_start`` to ``t_end``.
    """
    t0 = time.perf_counter()
    if _is_trivial(m) or m.n == 0:
        return _finish(m, [0] * m.n, [TracePoint(0.0, 0, float(m.offset))], 0, p.seed)
    h, Q = m.to_dense()
    n = m.n
    auto_hi, auto_lo = _auto_temperatures(h, Q)
    t_start = p.t_start if p.t_start is not None else auto_hi
    t_end = p.t_end if p.t_end is not None else min(auto_lo, t_start)
    if p.max_flips is not None:
        sweeps_per = [max(1, b // n) for b in _budget_split(p.max_flips, p.restarts)]
    elif p.sweeps is not None:
        sweeps_per = [p.sweeps] * p.restarts
    else:
        sweeps_per = None
    slice_time = p.time_limit / p.restarts

    best = _Tracker(t0)
    completed = 0
    flips_done = 0
    for r in range(p.restarts):
        rng = _restart_rng(p.seed, r)
        x = rng.integers(0, 2, n).astype(np.int8)
        f = _kernels.local_field(h, Q, x)
        e = _dense_energy(m, h, Q, x)
        r_best_x = x.copy()
        r_best_e = e
        tr_it = np.zeros(_TRACE_CAP, dtype=np.int64)
        tr_e = np.zeros(_TRACE_CAP)
        if sweeps_per is not None:
            total = sweeps_per[r]
        else:
            total = _sweeps_for_time(h, Q, n, slice_time)
        schedule = t_start * (t_end / t_start) ** (np.arange(total) / max(1, total - 1))
        it = 0
        for s0 in range(0, total, 256):
            temps = schedule[s0:s0 + 256]
            order = np.argsort(rng.random((len(temps), n)), axis=1)
            u = rng.random((len(temps), n))
            e, r_best_e, ntr = _kernels.anneal_run(h, Q, x, f, e, temps, order, u, r_best_x, r_best_e,
                                                   tr_it, tr_e, 0, it)
            it += len(temps) * n
            for k in range(ntr):
                best.note(flips_done + int(tr_it[k]), float(tr_e[k]))
            f = _kernels.local_field(h, Q, x)
            e = _dense_energy(m, h, Q, x)
        best.end_restart(r_best_x, r_best_e, flips_done + it)
        flips_done += it
        completed += 1
    return _finish(m, best.best_x, best.trace, completed, p.seed)


def _sweeps_for_time(h, Q, n, seconds: float) -> int:
    probe = 8
    x = np.zeros(n, dtype=np.int8)
    f = h.copy()
    tr_it = np.zeros(1, dtype=np.int64)
    tr_e = np.zeros(1)
    rng = np.random.default_rng(0)
    t1 = time.perf_counter()
    _kernels.anneal_run(h, Q, x, f, 0.0, np.ones(probe), np.tile(np.arange(n), (probe, 1)),
                        rng.random((probe, n)), x.copy(), 0.0, tr_it, tr_e, 0, 0)
    per = max((time.perf_counter() - t1) / probe, 1e-7)
    return max(1, int(seconds / per))


SOLVERS = {"tabu": solve_tabu, "anneal": solve_anneal}
