"""k-source shortest paths pipelines.

Four entry points:

* ``kssp_skeleton_sources``: all sources are skeleton nodes.  One SSSP copy
  per source is scheduled over the helpers, then every node combines its
  ``h``-hop table with the skeleton labels.
* ``kssp_random_sources``: random sources are added to the skeleton sample
  (up to ``n^(2/3)`` sources; beyond that a labeled fallback).
* ``kssp_arbitrary_sources``: each source is represented by its nearest
  skeleton node (its proxy); proxy tokens are broadcast to everyone.
* ``kssp_small``: at most one source per unit of global capacity; all copies
  run side by side on the host graph.
"""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .engine import BandwidthViolation, HybridConfig, HybridEngine, Message, RoundContext, ceil_log2
from .graph import INF, WeightedGraph, dijkstra_oracle, hop_limited_table
from .minor import build_overlay_tree
from .scheduler import SkeletonAlgorithm, assign_algorithms, run_scheduled, serialize_global
from .skeleton import (SkeletonGraph, SkeletonParams, build_skeleton, compute_helper_sets, sample_skeleton)


class PipelineError(ValueError):
    pass


# -- SSSP engines -------------------------------------------------------------------


class BellmanFordProgram:
    """Exact Bellman-Ford as repeated min-aggregation rounds over singleton supernodes.

    Each round a node whose label improved announces it across its edges;
    every node folds ``label(neighbor) + w`` with ``min``.
    """

    def __init__(self, source: int):
        self.source = source

    def init(self, v: int) -> dict:
        return {"d": 0 if v == self.source else INF, "changed": v == self.source}

    def step(self, st: dict, ctx: RoundContext) -> tuple[dict, bool]:
        for m in ctx.local_inbox:
            cand = m.payload + ctx.neighbors[m.src]
            if cand < st["d"]:
                st["d"] = cand
                st["changed"] = True
        if st["changed"]:
            if st["d"].bit_length() + 1 > ctx.bw.value_bits:
                raise ValueError(f"label {st['d']} wider than {ctx.bw.value_bits} bits")
            for u in ctx.neighbors:
                ctx.send_local(u, st["d"], ctx.bw.msg_bits(1))
            st["changed"] = False
        return st, True


class RoundedBellmanFordProgram:
    """(1 + eps) labels from Bellman-Ford on rounded weights, one run per distance scale.

    Scale ``j`` covers distances in ``(2^(j-1), 2^j]``: weights are rounded up
    to multiples of ``eps * 2^j / (2 * H)`` (``H`` bounds the hop count of a
    shortest path) and labels above ``(1 + eps) * 2^j`` are dropped.  The
    estimate is the smallest rounded label over all scales.
    """

    def __init__(self, source: int, eps: float, max_hops: int, max_dist: int):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.source = source
        self.eps = Fraction(str(eps))
        self.H = max(1, max_hops)
        top = max(0, math.ceil(math.log2(max(max_dist, 1))))
        self.units = [self.eps * 2 ** j / (2 * self.H) for j in range(top + 1)]
        self.caps = [math.floor((1 + self.eps) * 2 ** j / u) for j, u in enumerate(self.units)]

    def init(self, v: int) -> dict:
        lab = {j: 0 for j in range(len(self.units))} if v == self.source else {}
        return {"labels": lab, "d": 0 if v == self.source else INF, "delta": dict(lab)}

    def step(self, st: dict, ctx: RoundContext) -> tuple[dict, bool]:
        labels, delta = st["labels"], st["delta"]
        for m in ctx.local_inbox:
            w = ctx.neighbors[m.src]
            for j, c in m.payload.items():
                cand = c + math.ceil(w / self.units[j])
                if cand <= self.caps[j] and cand < labels.get(j, INF):
                    labels[j] = cand
                    delta[j] = cand
        if delta:
            best = min(c * self.units[j] for j, c in labels.items())
            st["d"] = int(best) if best.denominator == 1 else float(best)
            bits = ctx.bw.header_bits + len(delta) * (ctx.bw.value_bits + ctx.bw.id_bits)
            payload = dict(delta)
            for u in ctx.neighbors:
                ctx.send_local(u, payload, bits)
            st["delta"] = {}
        return st, True


@dataclass(frozen=True)
class SsspEngine:
    name: str

    def stretch(self, eps: float) -> float:
        return 1.0 if self.name == "exact" else 1.0 + eps

    def program(self, source: int, skeleton: SkeletonGraph, eps: float):
        if self.name == "exact":
            return BellmanFordProgram(source)
        max_w = max(skeleton.edges.values(), default=1)
        hops = max(1, len(skeleton.members) - 1)
        return RoundedBellmanFordProgram(source, eps, hops, hops * max_w)

    def round_bound(self, skeleton: SkeletonGraph, eps: float) -> int:
        m = len(skeleton.members)
        if self.name == "exact":
            return m + 1
        return (m + 1) * (math.ceil(2 * (1 + eps) / eps) + 1)


ENGINES = {"exact": SsspEngine("exact"), "rounding": SsspEngine("rounding")}


def get_engine(name: str) -> SsspEngine:
    if name not in ENGINES:
        raise PipelineError(f"unknown SSSP engine {name!r}; choose from {sorted(ENGINES)}")
    return ENGINES[name]


# -- results ------------------------------------------------------------------------


@dataclass
class DistanceTable:
    sources: list[int]
    dist: dict[int, dict[int, float]]  # v -> s -> estimate
    stretch: float
    label: str = ""
    notes: list[str] = field(default_factory=list)

    def __getitem__(self, key: tuple[int, int]) -> float:
        v, s = key
        return self.dist[v][s]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["v", "s", "dist", "stretch_bound"])
        for v in sorted(self.dist):
            for s in self.sources:
                w.writerow([v, s, _fmt(self.dist[v][s]), _fmt(self.stretch)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def stretch_stats(self, g: WeightedGraph) -> dict[str, float]:
        """Observed ``estimate / d_G`` over all pairs with ``v != s``, plus lower-bound breaches."""
        ratios = []
        below = 0
        for s in self.sources:
            exact = dijkstra_oracle(g, s).entries
            for v in g.nodes:
                est = self.dist[v][s]
                if est < exact[v]:
                    below += 1
                if v != s:
                    ratios.append(est / exact[v])
                elif est != 0:
                    below += 1
        arr = np.array(ratios) if ratios else np.array([1.0])
        return {"max": float(arr.max()), "mean": float(arr.mean()), "min": float(arr.min()), "below_exact": below}


def _fmt(x: float) -> str:
    if x == INF:
        return "inf"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


@dataclass
class ProxyMap:
    proxy: dict[int, int]
    offset: dict[int, int]

    @property
    def distinct(self) -> list[int]:
        return sorted(set(self.proxy.values()))


@dataclass
class PipelineResult:
    table: DistanceTable
    engine: HybridEngine
    skeleton: SkeletonGraph | None = None
    proxies: ProxyMap | None = None
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def ledger(self):
        return self.engine.ledger


# -- building blocks ----------------------------------------------------------------


def find_proxy(g: WeightedGraph, s: int, members: Iterable[int], h: int,
               table: Mapping[int, int] | None = None) -> tuple[int, int]:
    """Skeleton node minimizing ``d_{h,G}(s, .)``; ties go to the smallest id."""
    members = set(members)
    if table is None:
        table = hop_limited_table(g, [s], h)[s]
    best = min(((d, w) for w, d in table.items() if w in members), default=None)
    if best is None:
        raise PipelineError(f"no skeleton node within {h} hops of source {s}; h is too small")
    return best[1], best[0]


def _min_plus(tables: Mapping[int, Mapping[int, int]], members: Sequence[int], labels: Mapping[int, Mapping[int, float]],
              sources: Sequence[int], nodes: Sequence[int]) -> np.ndarray:
    """``out[v, s] = min_u tables[v][u] + labels[u][s]`` over skeleton nodes ``u``."""
    idx = {u: i for i, u in enumerate(members)}
    A = np.full((len(nodes), len(members)), np.inf)
    for r, v in enumerate(nodes):
        for u, d in tables[v].items():
            if u in idx:
                A[r, idx[u]] = d
    B = np.array([[labels[u][s] for s in sources] for u in members], dtype=float).reshape(len(members), len(sources))
    out = np.full((len(nodes), len(sources)), np.inf)
    for c in range(len(members)):
        np.minimum(out, A[:, c:c + 1] + B[c:c + 1, :], out=out)
    return out


def _number(x: float) -> float:
    return int(x) if math.isfinite(x) and float(x).is_integer() else float(x)


def kssp_skeleton_sources(g: WeightedGraph, skeleton: SkeletonGraph, sources: Sequence[int], eps: float = 0.0,
                          engine_name: str = "exact", engine: HybridEngine | None = None, seed: int = 0,
                          config: HybridConfig | None = None, require_gap: bool = True) -> PipelineResult:
    sources = sorted(set(sources))
    missing = [s for s in sources if s not in skeleton]
    if missing:
        raise PipelineError(f"sources {missing[:5]} are not skeleton nodes")
    engine = engine or HybridEngine(g, config or HybridConfig(seed=seed))
    k = len(sources)
    if require_gap and not engine.bw.capacity < k < g.n:
        raise PipelineError(f"skeleton-source pipeline needs capacity {engine.bw.capacity} < k={k} < n={g.n}")
    sssp = get_engine(engine_name)
    helpers = compute_helper_sets(g, skeleton.members, skeleton.x, engine)
    assignment = assign_algorithms(skeleton, helpers, k, g)
    algos = [SkeletonAlgorithm(i + 1, sssp.program(s, skeleton, eps), sssp.round_bound(skeleton, eps),
                               seed=seed * 1_000_003 + i, name=f"sssp[{s}]")
             for i, s in enumerate(sources)]
    sched = run_scheduled(skeleton, assignment, algos, engine=engine, g=g)
    labels = {u: {s: sched.outputs[i + 1][u]["d"] for i, s in enumerate(sources)} for u in skeleton.members}

    # every skeleton node floods its k labels h hops out
    bw = engine.bw
    engine.charge_local(skeleton.h, "kssp.post", {u: bw.header_bits + k * bw.msg_bits(1) for u in skeleton.members},
                        note="labels to the h-hop neighborhood")
    nodes = list(g.nodes)
    est = _min_plus(skeleton.tables, skeleton.members, labels, sources, nodes)
    dist: dict[int, dict[int, float]] = {}
    for r, v in enumerate(nodes):
        if v in skeleton:
            dist[v] = dict(labels[v])
        else:
            dist[v] = {s: _number(est[r, c]) for c, s in enumerate(sources)}
    table = DistanceTable(sources, dist, sssp.stretch(eps), label=f"skeleton-sources/{engine_name}")
    info = {"k": k, "h": skeleton.h, "x": skeleton.x, "skeleton_size": len(skeleton.members), "ell": assignment.ell,
            "mu": helpers.mu, "helper_radius": helpers.max_radius, "simulated_rounds": sched.simulated_rounds,
            "local_window": sched.local_window}
    return PipelineResult(table, engine, skeleton, info=info)


def _build(g: WeightedGraph, members: Iterable[int], params: SkeletonParams, engine: HybridEngine) -> SkeletonGraph:
    members = frozenset(members)
    if not members:
        raise PipelineError("the skeleton sample is empty; increase n or the sampling probability")
    return build_skeleton(g, members, params.h, engine, p=params.p, x=params.x)


def kssp_random_sources(g: WeightedGraph, k: int, eps: float = 0.0, engine_name: str = "exact", seed: int = 0,
                        config: HybridConfig | None = None, c_h: float = 4) -> PipelineResult:
    """``k`` uniformly random distinct sources drawn from ``seed``."""
    if not 1 <= k <= g.n:
        raise PipelineError(f"k={k} outside 1..{g.n}")
    rng = random.Random(f"sources/{seed}")
    sources = sorted(rng.sample(range(1, g.n + 1), k))
    engine = HybridEngine(g, config or HybridConfig(seed=seed))
    cap = engine.bw.capacity
    if k <= cap:
        res = kssp_small(g, sources, eps, engine_name, engine=engine, seed=seed)
        res.table.label = f"random-sources/small/{engine_name}"
        return res
    if k > g.n ** (2 / 3):
        res = kssp_arbitrary_sources(g, sources, eps, engine_name, seed=seed, engine=engine, c_h=c_h)
        res.table.label = f"random-sources/delegated-fallback/{engine_name}"
        res.table.notes.append("k > n^(2/3): exact branch delegated to prior work; arbitrary-source pipeline used")
        res.info["delegated"] = True
        return res
    params = SkeletonParams.for_sources(g.n, k, cap, c_h)
    sample = sample_skeleton(g, params.p, seed)
    skeleton = _build(g, sample | set(sources), params, engine)
    res = kssp_skeleton_sources(g, skeleton, sources, eps, engine_name, engine=engine, seed=seed, require_gap=False)
    res.table.label = f"random-sources/{engine_name}"
    res.info["delegated"] = False
    return res


@dataclass
class TokenResult:
    known: dict[int, set]
    loads: list[int]
    rounds: int
    logical_rounds: int


def token_dissemination(tokens: Mapping[int, Any], engine: HybridEngine, instances: int | None = None,
                        token_bits: int | None = None, seed: int = 0, phase: str = "kssp.tokens") -> TokenResult:
    """Every node learns every token.

    ``tokens`` maps a holder to its token.  Tokens are spread i.i.d. over
    ``instances`` overlay trees (each a balanced binary tree over a random
    ordering of all nodes).  Per tree, tokens climb to the root one per edge
    per step and are forwarded down to both children as they arrive.  Each
    step's messages are packed into physical rounds under the send and
    receive caps.
    """
    bw = engine.bw
    token_bits = token_bits or bw.msg_bits(1, 2 * bw.id_bits)
    if token_bits > bw.gamma_bits:
        raise BandwidthViolation("global-send", min(tokens, default=0), engine.round + 1, token_bits, bw.gamma_bits)
    y = instances or max(1, bw.gamma_bits // token_bits)
    nodes = engine.nodes
    rng = random.Random(f"tokens/{seed}")
    lane = {holder: rng.randrange(y) for holder in sorted(tokens)}
    trees = []
    for j in range(y):
        order = list(nodes)
        random.Random(f"tokens/{seed}/tree/{j}").shuffle(order)
        rank = {v: i for i, v in enumerate(order)}
        parent = {order[i]: (order[(i - 1) // 2] if i else None) for i in range(len(order))}
        children = {v: [c for c in (2 * rank[v] + 1, 2 * rank[v] + 2) if c < len(order)] for v in order}
        trees.append((parent, {v: [order[c] for c in cs] for v, cs in children.items()}, order[0]))
    loads = [sum(1 for h in lane.values() if h == j) for j in range(y)]

    known: dict[int, set] = {v: set() for v in nodes}
    up: list[dict[int, list]] = [{v: [] for v in nodes} for _ in range(y)]
    down: list[dict[int, list]] = [{v: [] for v in nodes} for _ in range(y)]
    for holder, tok in sorted(tokens.items()):
        j = lane[holder]
        known[holder].add(tok)
        parent, children, root = trees[j]
        if holder == root:
            for c in children[root]:
                down[j][root].append((c, tok))
        else:
            up[j][holder].append(tok)
    start = engine.round
    steps = 0
    while any(q for inst in up for q in inst.values()) or any(q for inst in down for q in inst.values()):
        steps += 1
        msgs: list[Message] = []
        for j in range(y):
            parent, children, root = trees[j]
            for v in nodes:
                if up[j][v]:
                    msgs.append(Message(v, parent[v], ("up", j, up[j][v].pop(0)), token_bits, len(msgs)))
                sent_to: set[int] = set()
                rest = []
                for c, tok in down[j][v]:
                    if c in sent_to:
                        rest.append((c, tok))
                    else:
                        sent_to.add(c)
                        msgs.append(Message(v, c, ("down", j, tok), token_bits, len(msgs)))
                down[j][v] = rest
        for batch in serialize_global(msgs, bw.gamma_bits):
            engine.transmit(global_msgs=batch, phase=phase, note=f"token step {steps}")
        for m in msgs:
            kind, j, tok = m.payload
            parent, children, root = trees[j]
            known[m.dst].add(tok)
            if kind == "up" and m.dst != root:
                up[j][m.dst].append(tok)
            elif kind == "up" or kind == "down":
                for c in children[m.dst]:
                    down[j][m.dst].append((c, tok))
    # completion is detected by one convergecast of done flags per tree
    depth = max(1, int(math.floor(math.log2(len(nodes)))))
    engine.charge(depth, phase, note="termination detection")
    return TokenResult(known, loads, engine.round - start, steps)


def kssp_arbitrary_sources(g: WeightedGraph, sources: Sequence[int], eps: float = 0.0, engine_name: str = "exact",
                           seed: int = 0, config: HybridConfig | None = None, engine: HybridEngine | None = None,
                           c_h: float = 4) -> PipelineResult:
    sources = sorted(set(sources))
    engine = engine or HybridEngine(g, config or HybridConfig(seed=seed))
    k = len(sources)
    cap = engine.bw.capacity
    if k <= cap:
        raise PipelineError(f"arbitrary-source pipeline needs k={k} > capacity {cap}; use the small pipeline")
    params = SkeletonParams.for_sources(g.n, k, cap, c_h)
    skeleton = _build(g, sample_skeleton(g, params.p, seed), params, engine)

    members = set(skeleton.members)
    proxy, offset = {}, {}
    for s in sources:
        proxy[s], offset[s] = find_proxy(g, s, members, skeleton.h, skeleton.tables[s])
    proxies = ProxyMap(proxy, offset)
    inner = kssp_skeleton_sources(g, skeleton, proxies.distinct, eps, engine_name, engine=engine, seed=seed,
                                  require_gap=False)

    tok = token_dissemination({s: (s, proxy[s], offset[s]) for s in sources}, engine, seed=seed)
    # every node needs the (source, proxy, offset) triple of every source
    incomplete = [v for v in g.nodes if len(tok.known[v]) != k]
    if incomplete:
        raise PipelineError(f"token dissemination left node {incomplete[0]} incomplete")

    near = hop_limited_table(g, sources, skeleton.h)
    bw = engine.bw
    engine.charge_local(skeleton.h, "kssp.local", {s: bw.msg_bits(1, bw.id_bits) for s in sources},
                        note="h-hop flood from every source")
    dist: dict[int, dict[int, float]] = {}
    for v in g.nodes:
        row = {}
        for s in sources:
            via = inner.table.dist[v][proxy[s]] + offset[s]
            row[s] = _number(min(via, near[s].get(v, INF)))
        dist[v] = row
    stretch = 3.0 + 3.0 * eps if engine_name != "exact" else 3.0
    table = DistanceTable(sources, dist, stretch, label=f"arbitrary-sources/{engine_name}")
    info = dict(inner.info)
    info.update({"k": k, "distinct_proxies": len(proxies.distinct), "token_loads": tok.loads,
                 "token_rounds": tok.rounds})
    return PipelineResult(table, engine, skeleton, proxies, info)


class Multiplexed:
    """Several programs on one node, each in its own message lane.

    Lane ``i`` sees only its own mail and its own random stream; its global
    traffic must stay within ``gamma / lanes`` bits per round.
    """

    def __init__(self, programs: Sequence[Any], seeds: Sequence[int]):
        self.programs = list(programs)
        self.seeds = list(seeds)

    def init(self, v: int) -> list:
        return [p.init(v) for p in self.programs]

    def step(self, states: list, ctx: RoundContext) -> tuple[list, bool]:
        lanes = len(self.programs)
        local: list[list[Message]] = [[] for _ in range(lanes)]
        glob: list[list[Message]] = [[] for _ in range(lanes)]
        for m in ctx.local_inbox:
            i, payload = m.payload
            local[i].append(Message(m.src, m.dst, payload, m.bits, m.seq))
        for m in ctx.global_inbox:
            i, payload = m.payload
            glob[i].append(Message(m.src, m.dst, payload, m.bits, m.seq))
        slice_bits = ctx.bw.gamma_bits // lanes
        halted_all = True
        for i, prog in enumerate(self.programs):
            sub = RoundContext(ctx.node, ctx.round, ctx.neighbors, local[i], glob[i], ctx.bw, self.seeds[i])
            states[i], halted = prog.step(states[i], sub)
            halted_all = halted_all and halted
            used = sum(m.bits for m in sub._out_global)
            if used > slice_bits:
                raise BandwidthViolation("global-send", ctx.node, ctx.round, used, slice_bits)
            for m in sub._out_local:
                ctx.send_local(m.dst, (i, m.payload), m.bits)
            for m in sub._out_global:
                ctx.send_global(m.dst, (i, m.payload), m.bits)
        return states, halted_all


def kssp_small(g: WeightedGraph, sources: Sequence[int], eps: float = 0.0, engine_name: str = "exact",
               engine: HybridEngine | None = None, seed: int = 0, config: HybridConfig | None = None) -> PipelineResult:
    """All copies at once on the host graph, viewed as a skeleton with ``p = 1, h = 1``."""
    sources = sorted(set(sources))
    engine = engine or HybridEngine(g, config or HybridConfig(seed=seed))
    k = len(sources)
    if k > engine.bw.capacity:
        raise PipelineError(f"small pipeline needs k={k} <= capacity {engine.bw.capacity}")
    whole = SkeletonGraph(g.n, tuple(g.nodes), {(u, v): w for u, v, w in g.edges()}, 1)
    sssp = get_engine(engine_name)
    mux = Multiplexed([sssp.program(s, whole, eps) for s in sources], [seed * 1_000_003 + i for i in range(k)])
    res = engine.run_until_halt(mux, max_rounds=max(sssp.round_bound(whole, eps), 2), phase="kssp.small")
    dist = {v: {s: res.states[v][i]["d"] for i, s in enumerate(sources)} for v in g.nodes}
    table = DistanceTable(sources, dist, sssp.stretch(eps), label=f"small/{engine_name}")
    return PipelineResult(table, engine, whole, info={"k": k})
