"""Experiment configs, runs, named invariant checks and scaling tables."""
from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .engine import GAMMA_STANDARD, HybridConfig, HybridEngine, read_keyvalue
from .euler import (euler_orient, extend_cluster, network_decomposition, power_graph,
                    random_eulerian_instance)
from .graph import GraphSpec, WeightedGraph, bfs_hops, dijkstra_oracle, generate_graph, hop_limited_table
from .kssp import (PipelineError, PipelineResult, kssp_arbitrary_sources, kssp_random_sources,
                   kssp_skeleton_sources, kssp_small, token_dissemination)
from .minor import MIN, all_choices, ma_round
from .scheduler import SkeletonAlgorithm, assign_algorithms, run_scheduled, standalone_run
from .skeleton import (SkeletonParams, build_skeleton, check_path_cover, compute_helper_sets, sample_skeleton,
                       verify_helper_family)

PIPELINES = ("skeleton", "random", "arbitrary", "small")
SOURCE_MODES = ("random", "clustered")
SCHEDULED_PHASES = ("skeleton", "sched")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    graph: GraphSpec
    hybrid: HybridConfig = field(default_factory=HybridConfig)
    pipeline: str = "arbitrary"
    k: int = 4
    eps: float = 0.0
    engine: str = "exact"
    seeds: list[int] = field(default_factory=lambda: [0])
    source_mode: str = "random"
    graph_seed: int | None = None  # None: the graph follows the run seed
    report: str | None = None
    table: str | None = None
    ledger: str | None = None

    def graph_for(self, seed: int) -> WeightedGraph:
        gs = self.graph_seed if self.graph_seed is not None else seed
        return generate_graph(replace(self.graph, seed=gs))

    def capacity(self) -> int:
        return self.hybrid.resolve(self.graph.n).capacity

    def validate(self) -> None:
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if self.source_mode not in SOURCE_MODES:
            raise ConfigError(f"source_mode must be one of {SOURCE_MODES}")
        if self.engine not in ("exact", "rounding"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.engine == "rounding" and self.eps <= 0:
            raise ConfigError("the rounding engine needs eps > 0")
        if not 1 <= self.k <= self.graph.n:
            raise ConfigError(f"k={self.k} outside 1..n")
        cap = self.capacity()
        if self.pipeline == "small" and self.k > cap:
            raise ConfigError(f"pipeline 'small' needs k <= capacity ({cap} messages per round), got k={self.k}")
        if self.pipeline in ("skeleton", "arbitrary") and self.k <= cap:
            raise ConfigError(f"pipeline {self.pipeline!r} needs k > capacity ({cap} messages per round), got k={self.k}")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    @classmethod
    def from_mapping(cls, d: Mapping[str, str]) -> "ExperimentConfig":
        d = {k.strip().replace("-", "_"): str(v).strip() for k, v in d.items()}
        try:
            weights = None
            if "weights" in d:
                lo, hi = (int(t) for t in d["weights"].split(","))
                weights = (lo, hi)
            spec = GraphSpec(kind=d.get("graph", "grid"), n=int(d.get("n", 64)), weight_range=weights,
                             seed=int(d.get("graph_seed", 0) or 0), p=float(d.get("p", 0.1)),
                             radius=float(d["radius"]) if d.get("radius") else None,
                             rows=int(d["rows"]) if d.get("rows") else None)
            hybrid = HybridConfig.from_mapping(d)
            cfg = cls(graph=spec, hybrid=hybrid, pipeline=d.get("pipeline", "arbitrary"), k=int(d.get("k", 4)),
                      eps=float(d.get("eps", 0.0)), engine=d.get("engine", "exact"),
                      seeds=[int(t) for t in d.get("seeds", "0").split(",") if t.strip()],
                      source_mode=d.get("source_mode", "random"),
                      graph_seed=int(d["graph_seed"]) if d.get("graph_seed") else None,
                      report=d.get("report") or None, table=d.get("table") or None, ledger=d.get("ledger") or None)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path, overrides: Mapping[str, str] | None = None) -> "ExperimentConfig":
        d = read_keyvalue(path)
        d.update(overrides or {})
        return cls.from_mapping(d)

    def to_mapping(self) -> dict[str, Any]:
        out = {"graph": self.graph.kind, "n": self.graph.n, "p": self.graph.p, "pipeline": self.pipeline, "k": self.k,
               "eps": self.eps, "engine": self.engine, "seeds": list(self.seeds), "source_mode": self.source_mode,
               "gamma": self.hybrid.gamma, "lambda": self.hybrid.lam, "violation_mode": self.hybrid.violation_mode,
               "header_bits": self.hybrid.header_bits}
        if self.graph.weight_range is not None:
            out["weights"] = list(self.graph.weight_range)
        if self.graph_seed is not None:
            out["graph_seed"] = self.graph_seed
        return out


def choose_sources(g: WeightedGraph, k: int, mode: str, seed: int, pool: Sequence[int] | None = None) -> list[int]:
    """``random``: uniform distinct nodes.  ``clustered``: the ``k`` nodes nearest (by hops) to a random center."""
    rng = random.Random(f"choose/{seed}")
    candidates = sorted(pool) if pool is not None else list(g.nodes)
    if len(candidates) < k:
        raise ConfigError(f"only {len(candidates)} candidate sources for k={k}")
    if mode == "random":
        return sorted(rng.sample(candidates, k))
    center = rng.choice(candidates)
    hops = bfs_hops(g, center)
    allowed = set(candidates)
    return sorted(sorted((v for v in hops if v in allowed), key=lambda v: (hops[v], v))[:k])


def run_pipeline(cfg: ExperimentConfig, g: WeightedGraph, seed: int) -> PipelineResult:
    hybrid = cfg.hybrid.with_seed(seed)
    if cfg.pipeline == "random":
        return kssp_random_sources(g, cfg.k, cfg.eps, cfg.engine, seed=seed, config=hybrid)
    if cfg.pipeline == "small":
        return kssp_small(g, choose_sources(g, cfg.k, cfg.source_mode, seed), cfg.eps, cfg.engine, seed=seed,
                          config=hybrid)
    if cfg.pipeline == "arbitrary":
        return kssp_arbitrary_sources(g, choose_sources(g, cfg.k, cfg.source_mode, seed), cfg.eps, cfg.engine,
                                      seed=seed, config=hybrid)
    engine = HybridEngine(g, hybrid)
    params = SkeletonParams.for_sources(g.n, cfg.k, engine.bw.capacity)
    members = sample_skeleton(g, params.p, seed)
    skeleton = build_skeleton(g, members, params.h, engine, p=params.p, x=params.x)
    sources = choose_sources(g, cfg.k, cfg.source_mode, seed, pool=members)
    return kssp_skeleton_sources(g, skeleton, sources, cfg.eps, cfg.engine, engine=engine, seed=seed)


def scheduled_rounds(phase_rounds: Mapping[str, int]) -> int:
    return sum(r for p, r in phase_rounds.items() if p.split(".")[0] in SCHEDULED_PHASES)


def skeleton_fidelity(g: WeightedGraph, skeleton) -> list[str]:
    """Skeleton edges are exactly the pairs within h hops, weighted by d_{h,G}; skeleton distances equal d_G."""
    problems = []
    members = list(skeleton.members)
    table = hop_limited_table(g, members, skeleton.h)
    for u in members:
        for v in members:
            if u < v:
                want = table[u].get(v)
                got = skeleton.edges.get((u, v))
                if want != got:
                    problems.append(f"skeleton edge ({u}, {v}) is {got}, expected {want}")
    for u in members:
        exact = dijkstra_oracle(g, u).entries
        ds = skeleton.distances(u)
        for v in members:
            if ds[v] != exact[v]:
                problems.append(f"d_S({u}, {v}) = {ds[v]} but d_G = {exact[v]}")
                break
    return problems


@dataclass
class RunRow:
    seed: int
    stretch_max: float
    stretch_mean: float
    stretch_min: float
    below_exact: int
    declared_stretch: float
    label: str
    rounds: dict[str, int]
    total_rounds: int
    scheduled_rounds: int
    max_global_sent: int
    max_global_recv: int
    gamma_bits: int
    checks: dict[str, bool]
    notes: list[str]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass
class ExperimentReport:
    config: dict[str, Any]
    rows: list[RunRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_json(self) -> str:
        body = {"config": self.config, "passed": self.passed,
                "rows": [dict(asdict(r), passed=r.passed) for r in self.rows]}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def evaluate(cfg: ExperimentConfig, g: WeightedGraph, seed: int, res: PipelineResult) -> RunRow:
    table = res.table
    stats = table.stretch_stats(g)
    led = res.ledger
    gamma = res.engine.bw.gamma_bits
    # float tolerance only guards the division in the ratio, not the bound itself
    checks = {
        "stretch": stats["below_exact"] == 0 and stats["max"] <= table.stretch * (1 + 1e-12),
        "bandwidth": led.max_global_sent() <= gamma and led.max_global_recv() <= gamma,
    }
    if res.skeleton is not None and cfg.pipeline != "small" and res.skeleton.h > 1:
        checks["skeleton"] = not skeleton_fidelity(g, res.skeleton)
    pr = led.phase_rounds()
    return RunRow(seed, stats["max"], stats["mean"], stats["min"], stats["below_exact"], table.stretch, table.label,
                  dict(sorted(pr.items())), len(led), scheduled_rounds(pr), led.max_global_sent(),
                  led.max_global_recv(), gamma, checks, list(table.notes))


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    cfg.validate()
    rows = []
    last: PipelineResult | None = None
    for seed in cfg.seeds:
        g = cfg.graph_for(seed)
        last = run_pipeline(cfg, g, seed)
        rows.append(evaluate(cfg, g, seed, last))
    report = ExperimentReport(cfg.to_mapping(), rows)
    if write:
        if cfg.report:
            report.write(cfg.report)
        if cfg.table and last is not None:
            last.table.to_csv(cfg.table)
        if cfg.ledger and last is not None:
            last.ledger.to_csv(cfg.ledger)
    return report


def ma_round_cost(g: WeightedGraph, hybrid: HybridConfig) -> int:
    """Rounds of one Minor-Aggregation round with no contraction (independent of k)."""
    engine = HybridEngine(g, hybrid)
    x = {v: v for v in g.nodes}
    return ma_round(g, all_choices(g, False), x, MIN, lambda a, b, w, ya, yb: yb, MIN, engine).rounds


def emit_scaling_table(cfg: ExperimentConfig, ks: Sequence[int], path: str | Path | None = None) -> tuple[str, list[dict]]:
    """Median scheduled-phase rounds per ``k``; ratio to the previous row."""
    if len(ks) < 3:
        raise ConfigError("a scaling table needs at least three values of k")
    rows = []
    prev = None
    g0 = cfg.graph_for(cfg.seeds[0])
    ma_cost = ma_round_cost(g0, cfg.hybrid)
    for k in ks:
        c = replace(cfg, k=k)
        c.validate()
        rep = run_experiment(c, write=False)
        med = statistics.median(r.scheduled_rounds for r in rep.rows)
        total = statistics.median(r.total_rounds for r in rep.rows)
        rows.append({"k": k, "median_rounds": med, "ratio": (med / prev) if prev else "",
                     "median_total_rounds": total, "ma_round_rounds": ma_cost, "passed": rep.passed})
        prev = med
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({key: (f"{v:.4f}" if isinstance(v, float) else v) for key, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text, rows


# -- named invariant checks -------------------------------------------------------------------


def check_euler(g: WeightedGraph, seed: int) -> tuple[bool, str]:
    virt = min(4, math.ceil(math.log2(g.n)) ** 2)
    inst = random_eulerian_instance(g, seed, num_virtual=virt)
    o = euler_orient(inst, seed=seed).orientation
    return o.complete and o.is_balanced(), f"{len(inst.edges)} edges, {virt} virtual nodes"


def check_decomposition(g: WeightedGraph, seed: int) -> tuple[bool, str]:
    adj = power_graph(g)
    dec = network_decomposition(adj, seed=seed)
    bound = 8 * math.ceil(math.log2(g.n))
    proper = all(dec.cluster_of[u] == dec.cluster_of[v] or dec.color(u) != dec.color(v)
                 for u in adj for v in adj[u])
    disjoint = True
    for c in set(dec.color_of_cluster.values()):
        seen: set[int] = set()
        for cid in dec.clusters_of_color(c):
            ext = extend_cluster(dec, cid, g)
            disjoint = disjoint and not (seen & ext)
            seen |= ext
    ok = proper and disjoint and dec.colors <= bound and dec.max_diameter <= bound
    return ok, f"colors={dec.colors} diameter={dec.max_diameter} bound={bound}"


def check_skeleton(g: WeightedGraph, seed: int) -> tuple[bool, str]:
    params = SkeletonParams.from_x(g.n, 4)
    sk = build_skeleton(g, sample_skeleton(g, params.p, seed), params.h, p=params.p, x=params.x)
    problems = skeleton_fidelity(g, sk)
    ok, witness = check_path_cover(g, sk.members, sk.h, sources=sorted(sk.members)[:8])
    return not problems and ok, problems[0] if problems else f"{len(sk.members)} skeleton nodes, h={sk.h}"


def check_helpers(g: WeightedGraph, seed: int) -> tuple[bool, str]:
    centers = sample_skeleton(g, 0.25, seed)
    fam = compute_helper_sets(g, centers, 4)
    problems = verify_helper_family(g, fam)
    return not problems, problems[0] if problems else f"mu={fam.mu} overlap={fam.max_overlap}"


def check_scheduler(g: WeightedGraph, seed: int, k: int = 4) -> tuple[bool, str]:
    from .kssp import BellmanFordProgram

    params = SkeletonParams.from_x(g.n, 4)
    engine = HybridEngine(g, HybridConfig(seed=seed))
    sk = build_skeleton(g, sample_skeleton(g, params.p, seed), params.h, engine, p=params.p, x=params.x)
    fam = compute_helper_sets(g, sk.members, sk.x, engine)
    asg = assign_algorithms(sk, fam, k, g)
    srcs = sorted(sk.members)[:k]
    algs = [SkeletonAlgorithm(i + 1, BellmanFordProgram(srcs[i % len(srcs)]), len(sk.members) + 1, seed=i)
            for i in range(k)]
    res = run_scheduled(sk, asg, algs, engine=engine, g=g)
    same = all(res.outputs[a.algo_id] == standalone_run(sk, a) for a in algs)
    return same, f"k={k}, {res.simulated_rounds} simulated rounds"


def check_tokens(g: WeightedGraph, seed: int, k: int = 16, gamma_tokens: int = 8) -> tuple[bool, str]:
    probe = HybridConfig().resolve(g.n)
    token_bits = probe.msg_bits(1, 2 * probe.id_bits)
    engine = HybridEngine(g, HybridConfig(gamma=gamma_tokens * token_bits, seed=seed))
    holders = sorted(random.Random(f"holders/{seed}").sample(list(g.nodes), min(k, g.n)))
    res = token_dissemination({h: ("tok", h) for h in holders}, engine, token_bits=token_bits, seed=seed)
    complete = all(len(res.known[v]) == len(holders) for v in g.nodes)
    bound = 4 * (k / gamma_tokens) * math.ceil(math.log2(g.n))
    return complete and max(res.loads) <= bound, f"max load {max(res.loads)} <= {bound:.1f}"


CHECKS: dict[str, Callable[[WeightedGraph, int], tuple[bool, str]]] = {
    "euler": check_euler,
    "decomposition": check_decomposition,
    "skeleton": check_skeleton,
    "helpers": check_helpers,
    "scheduler": check_scheduler,
    "tokens": check_tokens,
}


def run_checks(cfg: ExperimentConfig, names: Sequence[str]) -> list[tuple[str, int, bool, str]]:
    """Named invariant suites plus the pipeline's own (``stretch``, ``bandwidth``, ``determinism``)."""
    results = []
    pipeline_checks = {"stretch", "bandwidth", "determinism"}
    unknown = [n for n in names if n not in CHECKS and n not in pipeline_checks]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; available: {sorted(CHECKS) + sorted(pipeline_checks)}")
    for seed in cfg.seeds:
        g = cfg.graph_for(seed)
        for name in names:
            if name in CHECKS:
                ok, detail = CHECKS[name](g, seed)
                results.append((name, seed, ok, detail))
        wanted = [n for n in names if n in pipeline_checks]
        if wanted:
            single = replace(cfg, seeds=[seed])
            rep = run_experiment(single, write=False)
            row = rep.rows[0]
            for name in wanted:
                if name == "determinism":
                    again = run_experiment(single, write=False).to_json()
                    results.append((name, seed, again == rep.to_json(), "byte-identical rerun"))
                else:
                    results.append((name, seed, row.checks[name], f"max stretch {row.stretch_max:.4f}, "
                                    f"max global {row.max_global_sent}/{row.gamma_bits} bits"))
    return results


__all__ = ["ExperimentConfig", "ExperimentReport", "RunRow", "ConfigError", "run_experiment", "emit_scaling_table",
           "run_checks", "CHECKS", "choose_sources", "run_pipeline", "scheduled_rounds", "skeleton_fidelity",
           "GAMMA_STANDARD", "PipelineError"]
