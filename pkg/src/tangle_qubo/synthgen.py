"""Synthetic related-genome populations and single-end short-read simulation.

Every mutation is recorded as a list of primitive edits (substitute, insert,
delete, invert, move) so a child can be replayed from its parent exactly.
Randomness comes from ``SeedSequence(seed, spawn_key=(genome, event))``
streams, which keeps each draw independent of how many draws came before.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .graph_model import reverse_complement

BASES = "ACGT"
_LIBRARY_KEY = (1 << 31,)


@dataclass(frozen=True)
class EventRates:
    """Point rate is per base; structural rates are expected events per kb."""
    point: float = 0.0
    str_change: float = 0.0
    cnv_dup: float = 0.0
    cnv_del: float = 0.0
    repeat_short: float = 0.0
    repeat_long: float = 0.0
    translocation: float = 0.0
    inversion: float = 0.0

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


@dataclass(frozen=True)
class EventSizes:
    str_unit: tuple[int, int] = (2, 6)
    str_copies: tuple[int, int] = (2, 8)
    repeat_short: tuple[int, int] = (50, 500)
    repeat_long: tuple[int, int] = (2000, 10000)
    cnv: tuple[int, int] = (100, 5000)
    translocation: tuple[int, int] = (100, 2000)
    inversion: tuple[int, int] = (100, 2000)


@dataclass(frozen=True)
class MutationConfig:
    founder_rates: EventRates = field(default_factory=lambda: EventRates(
        point=0.01, str_change=0.5, cnv_dup=0.05, cnv_del=0.02, repeat_short=0.3,
        repeat_long=0.02, translocation=0.02, inversion=0.02))
    descendant_rates: EventRates = field(default_factory=lambda: EventRates(
        point=0.001, str_change=0.05, cnv_dup=0.005, cnv_del=0.002, repeat_short=0.03,
        repeat_long=0.002, translocation=0.002, inversion=0.002))
    sizes: EventSizes = field(default_factory=EventSizes)
    population_size: int = 100
    generations: int = 10
    short_families: int = 3  # distinct repeat elements copied around the genome
    long_families: int = 1
    flank: int = 50  # bases at each end never touched by any event

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for (name, f), (_, d) in zip(self.founder_rates.items(), self.descendant_rates.items()):
            if not (0 <= f <= 1 and 0 <= d <= 1):
                raise ValueError(f"rate {name} must lie in [0, 1]")
            if d > f:
                raise ValueError(f"descendant rate {name}={d} exceeds founder rate {f}")
        for f in fields(self.sizes):
            lo, hi = getattr(self.sizes, f.name)
            if not 1 <= lo <= hi:
                raise ValueError(f"bad size range {f.name}=({lo}, {hi})")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MutationConfig":
        d = dict(d)
        kw = {}
        if "founder_rates" in d:
            kw["founder_rates"] = EventRates(**d.pop("founder_rates"))
        if "descendant_rates" in d:
            kw["descendant_rates"] = EventRates(**d.pop("descendant_rates"))
        if "sizes" in d:
            kw["sizes"] = EventSizes(**{k: tuple(v) for k, v in d.pop("sizes").items()})
        return cls(**kw, **d)


@dataclass
class Genome:
    id: str
    sequence: str
    lineage: str | None = None
    event_log: list[dict] = field(default_factory=list)
    generation: int = 0
    origin: str | None = None  # founder only: the random string its log replays from


@dataclass
class ReadSet:
    reads: list[tuple[str, str]]
    source: str
    coverage: float
    error_rate: float
    read_length: int


# --- primitive edits ------------------------------------------------------------

def apply_op(seq: str, op: dict) -> str:
    kind = op["op"]
    p = op["pos"]
    if kind == "substitute":
        return seq[:p] + op["base"] + seq[p + 1:]
    if kind == "insert":
        return seq[:p] + op["seq"] + seq[p:]
    if kind == "delete":
        return seq[:p] + seq[p + op["len"]:]
    if kind == "invert":
        n = op["len"]
        return seq[:p] + reverse_complement(seq[p:p + n]) + seq[p + n:]
    if kind == "move":
        n = op["len"]
        block = seq[p:p + n]
        rest = seq[:p] + seq[p + n:]
        d = op["dest"]
        return rest[:d] + block + rest[d:]
    raise ValueError(f"unknown edit {kind!r}")


def replay(parent_sequence: str, event_log: list[dict]) -> str:
    seq = parent_sequence
    for event in event_log:
        for op in event["ops"]:
            seq = apply_op(seq, op)
    return seq


# --- event generation -------------------------------------------------------------

def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _random_dna(rng: np.random.Generator, n: int) -> str:
    return "".join(BASES[i] for i in rng.integers(0, 4, n))


def _size(rng, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


class _Mutator:
    def __init__(self, cfg: MutationConfig, library: dict[str, list[str]]):
        self.cfg = cfg
        self.library = library

    def _span(self, rng, seq: str, size: int) -> int | None:
        """Random start so [start, start+size) avoids the protected flanks."""
        f = self.cfg.flank
        hi = len(seq) - f - size
        if hi < f:
            return None
        return int(rng.integers(f, hi + 1))

    def _pos(self, rng, seq: str) -> int:
        f = self.cfg.flank
        return int(rng.integers(f, len(seq) - f + 1))

    def ops(self, kind: str, rng, seq: str) -> list[dict]:
        s = self.cfg.sizes
        if kind == "str_change":
            unit = _size(rng, s.str_unit)
            copies = _size(rng, s.str_copies)
            start = self._span(rng, seq, unit * (copies + 1))
            if start is None:
                return []
            motif = seq[start:start + unit]
            tract = seq[start:start + unit * (copies + 1)]
            # contract only where the motif already repeats, otherwise expand
            if rng.random() < 0.5 and tract == motif * (copies + 1):
                return [{"op": "delete", "pos": start, "len": unit * copies}]
            return [{"op": "insert", "pos": start, "seq": motif * copies}]
        if kind in ("cnv_dup", "cnv_del"):
            n = _size(rng, s.cnv)
            start = self._span(rng, seq, n)
            if start is None:
                return []
            if kind == "cnv_del":
                return [{"op": "delete", "pos": start, "len": n}]
            return [{"op": "insert", "pos": start + n, "seq": seq[start:start + n]}]
        if kind in ("repeat_short", "repeat_long"):
            family = self.library[kind]
            if not family:
                return []
            element = family[int(rng.integers(len(family)))]
            if rng.random() < 0.5:
                element = reverse_complement(element)
            return [{"op": "insert", "pos": self._pos(rng, seq), "seq": element}]
        if kind == "inversion":
            n = _size(rng, s.inversion)
            start = self._span(rng, seq, n)
            return [] if start is None else [{"op": "invert", "pos": start, "len": n}]
        if kind == "translocation":
            n = _size(rng, s.translocation)
            start = self._span(rng, seq, n)
            if start is None:
                return []
            f = self.cfg.flank
            dest = int(rng.integers(f, len(seq) - n - f + 1))
            return [{"op": "move", "pos": start, "len": n, "dest": dest}]
        raise ValueError(kind)

    def point_ops(self, rng, seq: str, rate: float) -> list[dict]:
        f = self.cfg.flank
        span = len(seq) - 2 * f
        if span <= 0 or rate <= 0:
            return []
        count = int(rng.binomial(span, rate))
        pos = np.sort(rng.choice(span, size=count, replace=False)) + f
        shift = rng.integers(1, 4, count)
        return [{"op": "substitute", "pos": int(p), "base": BASES[(BASES.index(seq[p]) + int(d)) % 4]}
                for p, d in zip(pos, shift)]

    def mutate(self, seq: str, rates: EventRates, seed: int, genome_idx: int) -> tuple[str, list[dict]]:
        plan = _rng(seed, genome_idx, 0)
        kinds: list[str] = []
        for name, rate in rates.items():
            if name != "point" and rate > 0:
                kinds += [name] * int(plan.poisson(rate * len(seq) / 1000))
        plan.shuffle(kinds)
        log = []
        for i, kind in enumerate(kinds):
            ops = self.ops(kind, _rng(seed, genome_idx, i + 1), seq)
            for op in ops:
                seq = apply_op(seq, op)
            if ops:
                log.append({"event": kind, "ops": ops})
        # point mutations last so they land on the final layout
        ops = self.point_ops(_rng(seed, genome_idx, len(kinds) + 1), seq, rates.point)
        for op in ops:
            seq = apply_op(seq, op)
        if ops:
            log.append({"event": "point", "ops": ops})
        return seq, log


def _library(cfg: MutationConfig, seed: int) -> dict[str, list[str]]:
    rng = _rng(seed, *_LIBRARY_KEY)
    return {
        "repeat_short": [_random_dna(rng, _size(rng, cfg.sizes.repeat_short)) for _ in range(cfg.short_families)],
        "repeat_long": [_random_dna(rng, _size(rng, cfg.sizes.repeat_long)) for _ in range(cfg.long_families)],
    }


def _min_founder_length(cfg: MutationConfig) -> int:
    s = cfg.sizes
    need = 1
    r = cfg.founder_rates
    if r.cnv_dup or r.cnv_del:
        need = max(need, s.cnv[1])
    if r.inversion:
        need = max(need, s.inversion[1])
    if r.translocation:
        need = max(need, s.translocation[1])
    if r.str_change:
        need = max(need, s.str_unit[1] * (s.str_copies[1] + 1))
    return need + 2 * cfg.flank


def generation_plan(cfg: MutationConfig) -> list[int]:
    """Generation index of each member; member 0 is the founder (generation 0)."""
    rest = cfg.population_size - 1
    out = [0]
    for g in range(cfg.generations):
        out += [g + 1] * (rest // cfg.generations + (1 if g < rest % cfg.generations else 0))
    return out


def generate_population(cfg: MutationConfig, founder_length: int, seed: int) -> list[Genome]:
    if founder_length < _min_founder_length(cfg):
        raise ValueError(f"founder_length {founder_length} is too small for the configured event sizes "
                         f"(need >= {_min_founder_length(cfg)})")
    mut = _Mutator(cfg, _library(cfg, seed))
    base = _random_dna(_rng(seed, 0, 1 << 20), founder_length)
    seq, log = mut.mutate(base, cfg.founder_rates, seed, 0)
    genomes = [Genome("g0", seq, None, log, 0, origin=base)]
    gens = generation_plan(cfg)
    for i in range(1, cfg.population_size):
        earlier = [j for j in range(i) if gens[j] < gens[i]]
        pick = _rng(seed, i, 1 << 21)
        parent = genomes[earlier[int(pick.integers(len(earlier)))]]
        seq, log = mut.mutate(parent.sequence, cfg.descendant_rates, seed, i)
        genomes.append(Genome(f"g{i}", seq, parent.id, log, gens[i]))
    return genomes


def simulate_reads(g: Genome, coverage: float, read_length: int, error_rate: float, seed: int) -> ReadSet:
    n = len(g.sequence)
    if read_length > n:
        raise ValueError(f"read_length {read_length} exceeds genome length {n}")
    if coverage <= 0:
        raise ValueError("coverage must be positive")
    if not 0 <= error_rate < 1:
        raise ValueError("error_rate must lie in [0, 1)")
    rng = _rng(seed, 0)
    count = math.ceil(coverage * n / read_length - 1e-9)
    starts = rng.integers(0, n - read_length + 1, count)
    strands = rng.integers(0, 2, count)
    fwd = np.frombuffer(g.sequence.encode(), dtype=np.uint8)
    code = np.full(256, 4, dtype=np.uint8)
    for i, b in enumerate(BASES):
        code[ord(b)] = i
    seq_codes = code[fwd]
    reads = []
    alphabet = np.frombuffer(BASES.encode() + b"N", dtype=np.uint8)
    for r in range(count):
        s = seq_codes[starts[r]:starts[r] + read_length].copy()
        if strands[r]:
            s = np.where(s < 4, 3 - s, 4)[::-1]
        if error_rate > 0:
            hit = rng.random(read_length) < error_rate
            shift = rng.integers(1, 4, read_length)
            s = np.where(hit & (s < 4), (s + shift) % 4, s)
        reads.append((f"{g.id}_r{r}", alphabet[s].tobytes().decode()))
    return ReadSet(reads, g.id, coverage, error_rate, read_length)


# --- output -------------------------------------------------------------------------

def write_fasta(records, path, width: int = 80) -> None:
    with open(path, "w") as fh:
        for name, seq in records:
            fh.write(f">{name}\n")
            for i in range(0, len(seq), width):
                fh.write(seq[i:i + width] + "\n")


def read_fasta(path) -> list[tuple[str, str]]:
    out = []
    name, chunks = None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if name is not None:
                    out.append((name, "".join(chunks)))
                name, chunks = line[1:].split()[0], []
            else:
                chunks.append(line.upper())
    if name is not None:
        out.append((name, "".join(chunks)))
    return out


def _event_record(g: Genome) -> dict:
    return {"id": g.id, "parent": g.lineage, "generation": g.generation, "events": g.event_log}


def write_event_log(g: Genome, path) -> None:
    Path(path).write_text(json.dumps(_event_record(g), indent=1))


def write_event_logs(genomes, path) -> None:
    """One JSON record per line, in population order."""
    Path(path).write_text("".join(json.dumps(_event_record(g)) + "\n" for g in genomes))
