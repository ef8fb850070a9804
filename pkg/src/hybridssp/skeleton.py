"""Skeleton graphs and helper sets.

A skeleton is a random node sample ``V_S`` with an edge between every two
sampled nodes at most ``h`` hops apart, weighted by the ``h``-hop limited
distance.  It is built by ``h`` rounds of hop-limited Bellman-Ford on the
local network, which also leaves every node with its ``h``-hop distances to
all skeleton nodes (used later for post-processing and proxies).
"""
from __future__ import annotations

import math
import random
import warnings
from collections import deque
from dataclasses import dataclass, field
from heapq import heappop, heappush
from pathlib import Path
from typing import Iterable, Mapping

from .engine import HybridConfig, HybridEngine, RoundContext, ceil_log2
from .graph import INF, WeightedGraph, bfs_hops, dijkstra_oracle

C_H = 4
C_MU = 2
C_HELP = 8


@dataclass(frozen=True)
class SkeletonParams:
    x: float
    p: float
    h: int

    @classmethod
    def for_sources(cls, n: int, k: int, capacity: int = 1, c_h: float = C_H) -> "SkeletonParams":
        """``x = sqrt(k / capacity)``: capacity is global messages per node per round."""
        x = max(1.0, math.sqrt(k / max(1, capacity)))
        return cls.from_x(n, x, c_h)

    @classmethod
    def from_x(cls, n: int, x: float, c_h: float = C_H) -> "SkeletonParams":
        h = max(1, math.ceil(c_h * x * math.ceil(math.log(max(n, 2)))))
        return cls(x, min(1.0, 1.0 / x), h)


def sample_skeleton(g: WeightedGraph, p: float, seed: int) -> frozenset[int]:
    if not 0 < p <= 1:
        raise ValueError(f"sampling probability {p} outside (0, 1]")
    rng = random.Random(f"skeleton/{seed}")
    return frozenset(v for v in g.nodes if rng.random() < p)


@dataclass
class SkeletonGraph:
    """Skeleton over host ``n`` nodes.  ``tables[v][s]`` is ``d_{h,G}(v, s)`` for skeleton ``s``."""

    n: int
    members: tuple[int, ...]
    edges: dict[tuple[int, int], int]
    h: int
    p: float = 1.0
    x: float = 1.0
    tables: dict[int, dict[int, int]] = field(default_factory=dict, repr=False)
    _adj: dict[int, dict[int, int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._adj = {u: {} for u in self.members}
        for (u, v), w in self.edges.items():
            self._adj[u][v] = w
            self._adj[v][u] = w

    @property
    def nodes(self) -> tuple[int, ...]:
        return self.members

    def neighbors(self, u: int) -> dict[int, int]:
        return self._adj[u]

    def __contains__(self, v: int) -> bool:
        return v in self._adj

    def distances(self, s: int) -> dict[int, float]:
        """Exact distances in the skeleton graph from ``s``."""
        dist = {u: INF for u in self.members}
        dist[s] = 0
        heap = [(0, s)]
        while heap:
            d, u = heappop(heap)
            if d > dist[u]:
                continue
            for v, w in self._adj[u].items():
                if d + w < dist[v]:
                    dist[v] = d + w
                    heappush(heap, (d + w, v))
        return dist

    def hop_diameter(self) -> int:
        best = 0
        for s in self.members:
            seen = {s: 0}
            q = deque([s])
            while q:
                u = q.popleft()
                for v in self._adj[u]:
                    if v not in seen:
                        seen[v] = seen[u] + 1
                        q.append(v)
            if len(seen) < len(self.members):
                return math.inf
            best = max(best, max(seen.values()))
        return best

    def export(self, edges_path: str | Path, flags_path: str | Path) -> None:
        lines = [f"{len(self.members)} {len(self.edges)}"]
        lines += [f"{u} {v} {w}" for (u, v), w in sorted(self.edges.items())]
        Path(edges_path).write_text("\n".join(lines) + "\n")
        members = set(self.members)
        Path(flags_path).write_text("".join(f"{v} {int(v in members)}\n" for v in range(1, self.n + 1)))


class HopLimitedFlood:
    """Bellman-Ford from every skeleton node, limited to ``h`` hops.

    Each node forwards only the entries that improved in the previous round,
    and stops forwarding after relative round ``h``.
    """

    def __init__(self, sources: frozenset[int], h: int, first_round: int):
        self.sources = sources
        self.h = h
        self.first_round = first_round

    def init(self, v: int) -> dict:
        return {"dist": {v: 0} if v in self.sources else {}, "delta": {v: 0} if v in self.sources else {}}

    def step(self, st: dict, ctx: RoundContext) -> tuple[dict, bool]:
        dist, delta = st["dist"], st["delta"]
        for m in ctx.local_inbox:
            w = ctx.neighbors[m.src]
            for s, d in m.payload.items():
                nd = d + w
                if nd < dist.get(s, INF):
                    dist[s] = nd
                    delta[s] = nd
        rel = ctx.round - self.first_round + 1
        if delta and rel <= self.h:
            bits = ctx.bw.header_bits + len(delta) * (ctx.bw.id_bits + ctx.bw.value_bits)
            payload = dict(delta)
            for u in ctx.neighbors:
                ctx.send_local(u, payload, bits)
        st["delta"] = {}
        return st, True


def build_skeleton(g: WeightedGraph, members: Iterable[int], h: int, engine: HybridEngine | None = None,
                   p: float = 1.0, x: float = 1.0, phase: str = "skeleton.build") -> SkeletonGraph:
    """Run the hop-limited flood for exactly ``h`` rounds and read off skeleton edges."""
    if h < 1:
        raise ValueError("hop radius h must be >= 1")
    engine = engine or HybridEngine(g, HybridConfig())
    sources = frozenset(members)
    for v in sources:
        g.check_node(v)
    before = engine.round
    res = engine.run_until_halt(HopLimitedFlood(sources, h, engine.round + 1), max_rounds=h + 1, phase=phase)
    used = engine.round - before
    # nodes cannot detect early convergence; the construction always spends h rounds
    engine.charge(h - used, phase, note="idle until round h")
    tables = {v: st["dist"] for v, st in res.states.items()}
    edges = {}
    for u in sorted(sources):
        for v, d in tables[u].items():
            if u < v and v in sources:
                edges[(u, v)] = d
    return SkeletonGraph(g.n, tuple(sorted(sources)), edges, h, p, x, tables)


def check_path_cover(g: WeightedGraph, members: Iterable[int], h: int, sources: Iterable[int] | None = None
                     ) -> tuple[bool, tuple[int, int] | None]:
    """Does some shortest path avoid ``h`` consecutive non-skeleton nodes, for every far pair?

    For each source, a DP over the shortest-path DAG keeps the shortest
    possible trailing run of non-skeleton nodes; a target at hop distance
    ``>= h`` passes if that run can be kept below ``h`` all the way.
    Returns ``(ok, witness_pair)``.
    """
    skel = set(members)
    for s in (sorted(sources) if sources is not None else g.nodes):
        dist = dijkstra_oracle(g, s).entries
        hops = bfs_hops(g, s)
        run: dict[int, float] = {s: 0 if s in skel else 1}
        if run[s] > h - 1:
            run[s] = INF
        for v in sorted(g.nodes, key=lambda u: (dist[u], u)):
            if v == s:
                continue
            best = INF
            for u, w in g.neighbors(v).items():
                if dist[u] + w == dist[v] and run.get(u, INF) < INF:
                    best = min(best, run[u])
            if best < INF:
                best = 0 if v in skel else best + 1
                if best > h - 1:
                    best = INF
            run[v] = best
        for t in sorted(g.nodes):
            if hops[t] >= h and run[t] == INF:
                return False, (s, t)
    return True, None


@dataclass
class HelperFamily:
    sets: dict[int, tuple[int, ...]]
    mu: int
    radius: dict[int, int]
    capacity: int

    def load(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for hs in self.sets.values():
            for v in hs:
                out[v] = out.get(v, 0) + 1
        return out

    @property
    def max_overlap(self) -> int:
        return max(self.load().values(), default=0)

    @property
    def min_size(self) -> int:
        return min((len(hs) for hs in self.sets.values()), default=0)

    @property
    def max_radius(self) -> int:
        return max(self.radius.values(), default=0)


def helper_mu(n: int, x: float, c_mu: float = C_MU) -> int:
    return max(1, math.ceil(c_mu * x * ceil_log2(n)))


def compute_helper_sets(g: WeightedGraph, centers: Iterable[int], x: float, engine: HybridEngine | None = None,
                        c_mu: float = C_MU, capacity: int | None = None, phase: str = "skeleton.helpers") -> HelperFamily:
    """Grow a BFS ball around each center, in id order, admitting nodes with spare capacity.

    A node joins at most ``capacity`` (default ``8 * ceil(log2 n)``) sets.
    A ball stops once it has ``mu`` members.  Charged ``mu + max radius``
    rounds: one round per BFS layer for the requests, plus the admission
    answers travelling back.
    """
    n = g.n
    mu = helper_mu(n, x, c_mu)
    if mu > n:
        warnings.warn(f"helper size {mu} exceeds n={n}; using {n}", RuntimeWarning, stacklevel=2)
        mu = n
    cap = capacity if capacity is not None else C_HELP * ceil_log2(n)
    load: dict[int, int] = {}
    sets: dict[int, tuple[int, ...]] = {}
    radius: dict[int, int] = {}
    for w in sorted(set(centers)):
        chosen: list[int] = []
        r = 0
        for v, d in sorted(bfs_hops(g, w, mu).items(), key=lambda t: (t[1], t[0])):
            if len(chosen) >= mu:
                break
            if load.get(v, 0) < cap:
                chosen.append(v)
                load[v] = load.get(v, 0) + 1
                r = d
        if len(chosen) < mu:
            raise RuntimeError(f"helper set of {w} reached only {len(chosen)} < {mu} nodes within {mu} hops")
        sets[w] = tuple(sorted(chosen))
        radius[w] = r
    fam = HelperFamily(sets, mu, radius, cap)
    if engine is not None and sets:
        engine.charge(mu + fam.max_radius, phase, note="helper ball growing")
    return fam


def verify_helper_family(g: WeightedGraph, fam: HelperFamily) -> list[str]:
    """All violated helper properties, as readable strings (empty when valid)."""
    problems = []
    for w, hs in sorted(fam.sets.items()):
        if len(hs) < fam.mu:
            problems.append(f"H_{w} has {len(hs)} < {fam.mu} members")
        hops = bfs_hops(g, w)
        far = [v for v in hs if hops[v] > fam.mu]
        if far:
            problems.append(f"H_{w} contains {far[0]} at hop {hops[far[0]]} > {fam.mu}")
    for v, c in sorted(fam.load().items()):
        if c > fam.capacity:
            problems.append(f"node {v} serves {c} > {fam.capacity} sets")
    return problems


def skeleton_from_tables(g: WeightedGraph, tables: Mapping[int, Mapping[int, int]], members: Iterable[int], h: int,
                         p: float = 1.0, x: float = 1.0) -> SkeletonGraph:
    """Skeleton assembled from precomputed ``h``-hop tables (no engine rounds)."""
    sources = frozenset(members)
    edges = {(u, v): d for u in sorted(sources) for v, d in tables[u].items() if u < v and v in sources}
    return SkeletonGraph(g.n, tuple(sorted(sources)), edges, h, p, x, {v: dict(t) for v, t in tables.items()})
