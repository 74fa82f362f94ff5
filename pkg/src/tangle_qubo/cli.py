"""Command-line driver: one subcommand per stage plus ``pipeline``.

Every command reads a YAML config (``--config``); ``--set key.sub=value``
overrides individual keys. Exit codes: 0 success, 2 configuration error,
3 stage failure. ``TANGLE_QUBO_WORKDIR`` sets the root that relative
working directories resolve against.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .assembly import decode, extract_sequence, render_path_string
from .classical_solvers import SolverParams, solve_anneal, solve_exhaustive_bits, solve_exhaustive_walks, solve_tabu
from .evaluator import EvalReport, evaluate
from .gfa_io import parse_path_string, read_gfa, save_gfa, write_gfa
from .graph_model import (AnnotatedGraph, from_gfa, normalize_copy_numbers, propagate_copy_numbers, to_gfa,
                          trim_zero_weight_edges)
from .kmer_annotator import annotate_reads, apply_annotation, build_kmer_index
from .pangenome import build_pangenome
from .qaoa_simulator import optimize_qaoa
from .qubo_builder import QuboModel, VariableLayout, build_qubo, encode_walk
from .synthgen import (EventRates, EventSizes, Genome, MutationConfig, generate_population, read_fasta,
                       simulate_reads, write_event_logs, write_fasta)
from .tangle_problems import WalkPair

log = logging.getLogger("tangle_qubo")

WORKDIR_ENV = "TANGLE_QUBO_WORKDIR"
SOLVER_NAMES = ("oracle-walk", "oracle-bits", "tabu", "anneal", "qaoa")
KIND_NAMES = ("auto", "tangle", "oriented", "diploid")

DEFAULTS: dict = {
    "seed": 0,
    "workdir": "run",
    "synth": {
        "founder_length": 5000,
        "population_size": 12,
        "generations": 3,
        "founder_rates": asdict(EventRates(point=0.01, str_change=0.3, cnv_dup=0.1, repeat_short=0.5,
                                           inversion=0.05)),
        "descendant_rates": asdict(EventRates(point=0.002)),
        "sizes": {**asdict(EventSizes()), "cnv": [100, 800], "inversion": [100, 500]},
        "short_families": 3,
        "long_families": 1,
        "flank": 50,
    },
    "graph": {
        "gfa": None,          # annotated GFA supplied from elsewhere; skips synth/annotate
        "k": 31,
        "pop_bubbles": True,
        "max_branch": None,
        "training": 10,       # first N genomes build the graph
    },
    "evaluation": {
        "genomes": None,      # list of genome ids; default: every genome left out of training
        "truth": None,        # FASTA of truth sequences when ``graph.gfa`` is used
    },
    "reads": {"coverage": 30.0, "read_length": 100, "error_rate": 0.002},
    "annotate": {
        "k": 21,
        "oracle": False,      # integer weights from the evaluation genome's own path
        "sequencing_depth": None,
        "use_expected_unique": False,
        "propagate": True,
        "trim": False,
    },
    "qubo": {"kind": "auto", "alpha": 1.2, "lambda1": 10, "lambda2": 5},
    "solver": {
        "name": "tabu",
        "time_limit": 60.0,
        "restarts": 10,
        "max_flips": None,
        "tabu_tenure": None,
        "sweeps": None,
        "qaoa": {"p": 2, "shots": 1000, "max_iters": 100, "alpha_cvar": 0.1, "cap": 20},
    },
    "decode": {"mode": "repair"},
    "evaluate": {"seed_k": 31},
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, artifacts: list[str]):
        self.stage = stage
        self.cause = cause
        self.artifacts = artifacts
        super().__init__(f"stage {stage!r} failed: {cause}")


# --- configuration ------------------------------------------------------------------

def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict) and key not in ("founder_rates", "descendant_rates", "sizes"):
            if not isinstance(val, dict):
                raise ConfigError(f"{path} must be a mapping")
            out[key] = _merge(base[key], val, path + ".")
        elif isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path} must be a mapping")
            unknown = set(val) - set(base[key])
            if unknown:
                raise ConfigError(f"unknown keys under {path}: {sorted(unknown)}")
            out[key] = {**base[key], **val}
        else:
            out[key] = val
    return out


def _set_override(cfg: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ConfigError(f"override {assignment!r} must look like key.sub=value")
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = yaml.safe_load(raw)


@dataclass
class PipelineConfig:
    data: dict

    def __getitem__(self, key: str):
        return self.data[key]

    def mutation_config(self) -> MutationConfig:
        s = self.data["synth"]
        sizes = {k: tuple(v) for k, v in s["sizes"].items()}
        return MutationConfig(EventRates(**s["founder_rates"]), EventRates(**s["descendant_rates"]),
                              EventSizes(**sizes), s["population_size"], s["generations"],
                              s["short_families"], s["long_families"], s["flank"])

    def solver_params(self, seed: int) -> SolverParams:
        s = self.data["solver"]
        return SolverParams(time_limit=float(s["time_limit"]), seed=seed, restarts=int(s["restarts"]),
                            tabu_tenure=s["tabu_tenure"], sweeps=s["sweeps"], max_flips=s["max_flips"])


def load_config(path: str | os.PathLike | None = None, overrides: list[str] = ()) -> PipelineConfig:
    data = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a mapping")
        data = _merge(data, loaded)
    for o in overrides:
        _set_override(data, o)
    cfg = PipelineConfig(data)
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    d = cfg.data
    if d["solver"]["name"] not in SOLVER_NAMES:
        raise ConfigError(f"solver.name must be one of {SOLVER_NAMES}")
    if d["qubo"]["kind"] not in KIND_NAMES:
        raise ConfigError(f"qubo.kind must be one of {KIND_NAMES}")
    if d["decode"]["mode"] not in ("strict", "repair"):
        raise ConfigError("decode.mode must be strict or repair")
    if d["solver"]["name"] == "qaoa" and d["qubo"]["kind"] == "diploid":
        raise ConfigError("the qaoa solver does not support diploid problems")
    if d["graph"]["gfa"] is not None and not Path(d["graph"]["gfa"]).exists():
        raise ConfigError(f"graph.gfa {d['graph']['gfa']} does not exist")
    if d["evaluation"]["truth"] is not None and not Path(d["evaluation"]["truth"]).exists():
        raise ConfigError(f"evaluation.truth {d['evaluation']['truth']} does not exist")
    try:
        cfg.mutation_config()
        cfg.solver_params(0)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def derive_seed(root: int, *key: int) -> int:
    return int(np.random.SeedSequence(root, spawn_key=key).generate_state(1)[0])


def resolve_workdir(path: str | os.PathLike) -> Path:
    p = Path(path)
    if not p.is_absolute() and os.environ.get(WORKDIR_ENV):
        p = Path(os.environ[WORKDIR_ENV]) / p
    return p


# --- manifest -----------------------------------------------------------------------

def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StageRecord:
    name: str
    seconds: float
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    stages: list[StageRecord] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    def without_times(self) -> dict:
        d = asdict(self)
        for s in d["stages"]:
            s.pop("seconds")
        return d

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["config"], d["version"], [StageRecord(**s) for s in d["stages"]])

    def verify(self, root: str | os.PathLike) -> list[str]:
        """Paths whose current digest differs from the recorded one."""
        bad = []
        for s in self.stages:
            for rel, digest in {**s.inputs, **s.outputs}.items():
                p = Path(root) / rel
                if not p.exists() or sha256_file(p) != digest:
                    bad.append(rel)
        return bad


class _Runner:
    """Runs stages, timing them and recording artifact digests."""

    def __init__(self, root: Path, manifest: RunManifest):
        self.root = root
        self.manifest = manifest

    def _rel(self, p: Path) -> str:
        try:
            return str(p.relative_to(self.root))
        except ValueError:
            return str(p)

    def run(self, name: str, fn, inputs: list[Path], outputs: list[Path]):
        t0 = time.perf_counter()
        try:
            result = fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc, [self._rel(p) for p in inputs + outputs if p.exists()]) from exc
        rec = StageRecord(name, round(time.perf_counter() - t0, 3),
                          {self._rel(p): sha256_file(p) for p in inputs},
                          {self._rel(p): sha256_file(p) for p in outputs})
        self.manifest.stages.append(rec)
        log.info("%s done in %.2fs", name, rec.seconds)
        return result


# --- stage functions ----------------------------------------------------------------

def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def stage_synth(cfg: PipelineConfig, outdir: Path) -> list[Genome]:
    if not outdir.is_dir():
        raise FileNotFoundError(f"output directory {outdir} does not exist")
    pop = generate_population(cfg.mutation_config(), cfg["synth"]["founder_length"], cfg["seed"])
    # write to temporaries first so a failure leaves no partial outputs
    targets = {
        "population.fasta": lambda p: write_fasta([(g.id, g.sequence) for g in pop], p),
        "events.jsonl": lambda p: write_event_logs(pop, p),
        "truth.json": lambda p: _write_text(p, json.dumps(
            {g.id: {"length": len(g.sequence), "lineage": g.lineage, "generation": g.generation}
             for g in pop}, indent=1)),
    }
    tmp = []
    try:
        for name, writer in targets.items():
            p = outdir / (name + ".tmp")
            writer(p)
            tmp.append((p, outdir / name))
    except BaseException:
        for p, _ in tmp:
            p.unlink(missing_ok=True)
        raise
    for p, final in tmp:
        p.replace(final)
    return pop


def _gfa_with_paths(g: AnnotatedGraph, paths: dict[str, list]) -> bytes:
    doc = to_gfa(g, weights=False)
    for name, walk in paths.items():
        doc.other.append(f"P\t{name}\t{render_path_string(walk)}\t*")
    return write_gfa(doc)


def read_gfa_paths(path: Path) -> dict[str, list]:
    out = {}
    for line in read_gfa(path).other:
        fields = line.split("\t")
        if fields[0] == "P" and len(fields) >= 3:
            out[fields[1]] = parse_path_string(fields[2])
    return out


def stage_build_graph(cfg: PipelineConfig, genomes: list[tuple[str, str]], gfa_out: Path, variants_out: Path):
    gc = cfg["graph"]
    pg = build_pangenome(genomes, k=gc["k"], seed=cfg["seed"], pop_bubbles=gc["pop_bubbles"],
                         max_branch=gc["max_branch"])
    gfa_out.write_bytes(_gfa_with_paths(pg.graph, pg.paths))
    variants_out.write_text(json.dumps(pg.variants, indent=1, sort_keys=True))
    return pg


def load_graph(path: Path, k: int) -> AnnotatedGraph:
    return from_gfa(read_gfa(path), k)


def stage_annotate(cfg: PipelineConfig, graph_gfa: Path, variants: Path | None, reads_fa: Path, out: Path):
    ac = cfg["annotate"]
    g = load_graph(graph_gfa, cfg["graph"]["k"])
    var = json.loads(variants.read_text()) if variants is not None and variants.exists() else None
    idx = build_kmer_index(g, ac["k"], var)
    hits = annotate_reads(read_fasta(reads_fa), idx, g)
    ag = apply_annotation(g, hits, idx)
    save_gfa(to_gfa(ag, weights=False), out)
    return ag


def oracle_weights(g: AnnotatedGraph, walk) -> AnnotatedGraph:
    counts: dict[str, int] = {}
    for v, _ in walk:
        counts[v] = counts.get(v, 0) + 1
    return g.with_weights({v: float(counts.get(v, 0)) for v in g.nodes})


def stage_normalise(cfg: PipelineConfig, g: AnnotatedGraph, out: Path) -> AnnotatedGraph:
    ac = cfg["annotate"]
    ng = normalize_copy_numbers(g, ac["sequencing_depth"], ac["use_expected_unique"])
    if ac["propagate"]:
        ng = propagate_copy_numbers(ng)
    save_gfa(to_gfa(ng), out)
    return ng


def stage_trim(g: AnnotatedGraph, out: Path) -> AnnotatedGraph:
    tg = trim_zero_weight_edges(g)
    save_gfa(to_gfa(tg), out)
    return tg


def choose_kind(g: AnnotatedGraph, kind: str) -> str:
    """``auto`` picks the forward-only encoding when no link switches strand,
    in which case it loses no walks (up to reversal)."""
    if kind != "auto":
        return kind
    return "tangle" if all(a[1] == b[1] for a, b in g.edges) else "oriented"


def stage_build_qubo(cfg: PipelineConfig, g: AnnotatedGraph, qubo_out: Path, layout_out: Path) -> QuboModel:
    qc = cfg["qubo"]
    m = build_qubo(g, choose_kind(g, qc["kind"]), alpha=qc["alpha"], lambda1=qc["lambda1"], lambda2=qc["lambda2"])
    qubo_out.write_text(m.to_text())
    layout_out.write_text(m.layout.to_json())
    return m


def stage_solve(cfg: PipelineConfig, g: AnnotatedGraph, m: QuboModel, out: Path) -> list[int]:
    sc = cfg["solver"]
    name = sc["name"]
    seed = derive_seed(cfg["seed"], 3)
    record: dict = {"solver": name, "n": m.n}
    if name == "oracle-walk":
        sol = solve_exhaustive_walks(g, m.layout.kind, m.layout.T)
        walk = sol.walk
        if m.layout.kind == "diploid":
            walk = WalkPair(*sol.walk) if not isinstance(sol.walk, WalkPair) else sol.walk
        x = encode_walk(m.layout, walk)
        record.update(cost=float(sol.cost), expansions=sol.expansions)
    elif name == "oracle-bits":
        res = solve_exhaustive_bits(m)
        x = list(res.best_x)
        record.update(json.loads(res.to_json()))
    elif name == "qaoa":
        qc = sc["qaoa"]
        res = optimize_qaoa(m, p=qc["p"], shots=qc["shots"], max_iters=qc["max_iters"],
                            alpha_cvar=qc["alpha_cvar"], seed=seed, cap=qc["cap"])
        x = list(res.best_x)
        record.update(json.loads(res.to_json()))
    else:
        solver = solve_tabu if name == "tabu" else solve_anneal
        res = solver(m, cfg.solver_params(seed))
        x = list(res.best_x)
        record.update(json.loads(res.to_json()))
    record["x"] = "".join(str(int(b)) for b in x)
    out.write_text(json.dumps(record, indent=1, sort_keys=True))
    return [int(b) for b in x]


def stage_decode(cfg: PipelineConfig, g: AnnotatedGraph, layout: VariableLayout, x: list[int],
                 walks_out: Path, contigs_out: Path) -> list[str]:
    rep = decode(layout, x, cfg["decode"]["mode"])
    lines = [f"{b}\t{render_path_string(w)}" for b, segs in enumerate(rep.segments) for w in segs]
    lines += [f"#violation\t{v}" for v in rep.violations]
    walks_out.write_text("\n".join(lines) + "\n")
    contigs = [extract_sequence(g, w) for w in rep.walks]
    write_fasta([(f"contig{i + 1}", c) for i, c in enumerate(contigs)], contigs_out)
    return contigs


def stage_evaluate(cfg: PipelineConfig, truth: str, contigs: list[str], json_out: Path, tsv_out: Path) -> EvalReport:
    rep = evaluate(truth, contigs, seed_k=cfg["evaluate"]["seed_k"])
    json_out.write_text(rep.to_json() + "\n")
    tsv_out.write_text(rep.to_tsv())
    return rep


# --- commands -----------------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, outdir: Path | None = None) -> RunManifest:
    root = outdir or resolve_workdir(cfg["workdir"])
    manifest = RunManifest(cfg.data)
    run = _Runner(root, manifest)
    outs = [root / n for n in ("population.fasta", "events.jsonl", "truth.json")]
    run.run("synth", lambda: stage_synth(cfg, root), [], outs)
    (root / "manifest.json").write_text(manifest.to_json())
    return manifest


def _evaluation_targets(cfg: PipelineConfig, ids: list[str], training: list[str]) -> list[str]:
    chosen = cfg["evaluation"]["genomes"]
    if chosen is None:
        left = [g for g in ids if g not in training]
        return left or ids[-1:]
    missing = [g for g in chosen if g not in ids]
    if missing:
        raise ConfigError(f"evaluation genomes not in the population: {missing}")
    return list(chosen)


def cmd_pipeline(cfg: PipelineConfig) -> dict[str, EvalReport | None]:
    """Run every stage; returns the report per evaluation genome."""
    root = resolve_workdir(cfg["workdir"])
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.data)
    run = _Runner(root, manifest)
    reports: dict[str, EvalReport | None] = {}
    try:
        if cfg["graph"]["gfa"] is not None:
            reports = _pipeline_external(cfg, root, run)
        else:
            reports = _pipeline_synthetic(cfg, root, run)
    finally:
        (root / "manifest.json").write_text(manifest.to_json())
    rows = ["genome\t" + "\t".join(EvalReport.COLUMNS)]
    for gid, rep in reports.items():
        if rep is not None:
            rows.append(f"{gid}\t{rep.to_tsv(header=False).strip()}")
    (root / "summary.tsv").write_text("\n".join(rows) + "\n")
    (root / "summary.json").write_text(json.dumps(
        {gid: (asdict(r) if r is not None else None) for gid, r in reports.items()}, indent=1))
    return reports


def _solve_and_report(cfg, run: _Runner, wd: Path, g: AnnotatedGraph, weighted_gfa: Path, truth: str | None):
    if cfg["annotate"]["trim"]:
        trimmed = wd / "trimmed.gfa"
        g = run.run("trim", lambda: stage_trim(g, trimmed), [weighted_gfa], [trimmed])
        weighted_gfa = trimmed
    qubo_p, layout_p = wd / "qubo.txt", wd / "layout.json"
    m = run.run("build-qubo", lambda: stage_build_qubo(cfg, g, qubo_p, layout_p), [weighted_gfa], [qubo_p, layout_p])
    sol_p = wd / "solution.json"
    x = run.run("solve", lambda: stage_solve(cfg, g, m, sol_p), [qubo_p, layout_p], [sol_p])
    walks_p, contigs_p = wd / "walks.tsv", wd / "contigs.fasta"
    contigs = run.run("decode", lambda: stage_decode(cfg, g, m.layout, x, walks_p, contigs_p),
                      [sol_p, layout_p, weighted_gfa], [walks_p, contigs_p])
    if truth is None:
        return None
    rj, rt = wd / "report.json", wd / "report.tsv"
    return run.run("evaluate", lambda: stage_evaluate(cfg, truth, contigs, rj, rt), [contigs_p], [rj, rt])


def _pipeline_synthetic(cfg: PipelineConfig, root: Path, run: _Runner) -> dict:
    outs = [root / n for n in ("population.fasta", "events.jsonl", "truth.json")]
    pop = run.run("synth", lambda: stage_synth(cfg, root), [], outs)
    seqs = {g.id: g.sequence for g in pop}
    ids = [g.id for g in pop]
    training = ids[:cfg["graph"]["training"]]
    targets = _evaluation_targets(cfg, ids, training)

    graph_p, var_p = root / "graph.gfa", root / "variants.json"
    pg = run.run("build-graph", lambda: stage_build_graph(cfg, [(i, seqs[i]) for i in training], graph_p, var_p),
                 [outs[0]], [graph_p, var_p])
    reports = {}
    for ti, gid in enumerate(targets):
        wd = root / "eval" / gid
        wd.mkdir(parents=True, exist_ok=True)
        weighted = wd / "weighted.gfa"
        if cfg["annotate"]["oracle"]:
            if gid not in pg.paths:
                raise StageError("annotate", ValueError(f"oracle weights need {gid} among the training genomes"),
                                 [])
            g = run.run("annotate", lambda: _save(oracle_weights(pg.graph, pg.paths[gid]), weighted),
                        [graph_p], [weighted])
        else:
            reads_p = wd / "reads.fasta"
            rc = cfg["reads"]
            genome = next(g for g in pop if g.id == gid)
            run.run("reads", lambda: write_fasta(
                simulate_reads(genome, rc["coverage"], rc["read_length"], rc["error_rate"],
                               derive_seed(cfg["seed"], 1, ti)).reads, reads_p), [outs[0]], [reads_p])
            ann_p = wd / "annotated.gfa"
            ag = run.run("annotate", lambda: stage_annotate(cfg, graph_p, var_p, reads_p, ann_p),
                         [graph_p, var_p, reads_p], [ann_p])
            g = run.run("normalise", lambda: stage_normalise(cfg, ag, weighted), [ann_p], [weighted])
        reports[gid] = _solve_and_report(cfg, run, wd, g, weighted, seqs[gid])
    return reports


def _save(g: AnnotatedGraph, path: Path) -> AnnotatedGraph:
    save_gfa(to_gfa(g), path)
    return g


def _pipeline_external(cfg: PipelineConfig, root: Path, run: _Runner) -> dict:
    src = Path(cfg["graph"]["gfa"])
    weighted = root / "weighted.gfa"
    g0 = load_graph(src, cfg["annotate"]["k"])
    g = run.run("normalise", lambda: stage_normalise(cfg, g0, weighted), [src], [weighted])
    truth = None
    name = "assembly"
    if cfg["evaluation"]["truth"] is not None:
        records = read_fasta(cfg["evaluation"]["truth"])
        name, truth = records[0]
    return {name: _solve_and_report(cfg, run, root, g, weighted, truth)}


# --- per-stage subcommands ----------------------------------------------------------

def _sub_build_graph(cfg, a):
    genomes = read_fasta(a.genomes)
    if a.ids:
        keep = set(a.ids.split(","))
        genomes = [r for r in genomes if r[0] in keep]
    stage_build_graph(cfg, genomes, Path(a.out), Path(a.variants))


def _sub_annotate(cfg, a):
    stage_annotate(cfg, Path(a.graph), Path(a.variants) if a.variants else None, Path(a.reads), Path(a.out))


def _sub_normalise(cfg, a):
    stage_normalise(cfg, load_graph(Path(a.graph), cfg["annotate"]["k"]), Path(a.out))


def _sub_trim(cfg, a):
    stage_trim(_weighted(cfg, a.graph), Path(a.out))


def _weighted(cfg, path) -> AnnotatedGraph:
    return load_graph(Path(path), cfg["annotate"]["k"])


def _sub_build_qubo(cfg, a):
    stage_build_qubo(cfg, _weighted(cfg, a.graph), Path(a.out), Path(a.layout))


def _load_qubo(a) -> QuboModel:
    layout = VariableLayout.from_json(Path(a.layout).read_text())
    return QuboModel.from_text(Path(a.qubo).read_text(), layout)


def _sub_solve(cfg, a):
    stage_solve(cfg, _weighted(cfg, a.graph), _load_qubo(a), Path(a.out))


def _sub_decode(cfg, a):
    layout = VariableLayout.from_json(Path(a.layout).read_text())
    x = [int(c) for c in json.loads(Path(a.solution).read_text())["x"]]
    stage_decode(cfg, _weighted(cfg, a.graph), layout, x, Path(a.walks), Path(a.out))


def _sub_evaluate(cfg, a):
    truth = read_fasta(a.truth)[0][1]
    contigs = [s for _, s in read_fasta(a.contigs)]
    rep = evaluate(truth, contigs, seed_k=cfg["evaluate"]["seed_k"])
    if a.out:
        Path(a.out).write_text(rep.to_json() + "\n")
    sys.stdout.write(rep.to_tsv())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tangle-qubo", description="Pangenome tangle resolution via QUBO.")
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. solver.name=anneal")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--workdir", help="working directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="simulate a population")
    s = sub.add_parser("build-graph", parents=[common], help="pangenome graph from genomes")
    s.add_argument("--genomes", required=True)
    s.add_argument("--ids", help="comma-separated genome ids to use")
    s.add_argument("--out", required=True)
    s.add_argument("--variants", required=True)
    s = sub.add_parser("annotate", parents=[common], help="k-mer counts from reads")
    s.add_argument("--graph", required=True)
    s.add_argument("--reads", required=True)
    s.add_argument("--variants")
    s.add_argument("--out", required=True)
    s = sub.add_parser("normalise", parents=[common], help="copy numbers from k-mer counts")
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s = sub.add_parser("trim", parents=[common], help="drop superfluous zero-count edges")
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s = sub.add_parser("build-qubo", parents=[common], help="encode the walk problem")
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--layout", required=True)
    s = sub.add_parser("solve", parents=[common], help="minimise a QUBO")
    s.add_argument("--graph", required=True)
    s.add_argument("--qubo", required=True)
    s.add_argument("--layout", required=True)
    s.add_argument("--out", required=True)
    s = sub.add_parser("decode", parents=[common], help="assignment to walks and contigs")
    s.add_argument("--graph", required=True)
    s.add_argument("--layout", required=True)
    s.add_argument("--solution", required=True)
    s.add_argument("--walks", required=True)
    s.add_argument("--out", required=True)
    s = sub.add_parser("evaluate", parents=[common], help="score contigs against the truth")
    s.add_argument("--truth", required=True)
    s.add_argument("--contigs", required=True)
    s.add_argument("--out")
    sub.add_parser("pipeline", parents=[common], help="run every stage")
    return p


_STAGE_COMMANDS = {
    "build-graph": _sub_build_graph, "annotate": _sub_annotate, "normalise": _sub_normalise,
    "trim": _sub_trim, "build-qubo": _sub_build_qubo, "solve": _sub_solve, "decode": _sub_decode,
    "evaluate": _sub_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.workdir is not None:
        overrides.append(f"workdir={args.workdir}")
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "pipeline":
            reports = cmd_pipeline(cfg)
            for gid, rep in reports.items():
                if rep is not None:
                    print(f"{gid}\t{rep.to_tsv(header=False).strip()}")
        else:
            _STAGE_COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.artifacts:
            print("artifacts kept: " + ", ".join(exc.artifacts), file=sys.stderr)
        return 3
    except Exception as exc:  # a stage run outside the pipeline
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
