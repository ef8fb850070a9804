"""Eulerian orientation oracle.

Pipeline: decompose the square of the host graph into colored low-diameter
clusters, then for each color in turn let every extended cluster (cluster
plus its one-hop neighborhood) peel off and orient the cycles it can see.
What is left is covered by one forest per color and is oriented by walking
closed trails.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .engine import HybridConfig, HybridEngine, ceil_log2
from .graph import WeightedGraph

C_RES = 2
C_VIRT = 1  # virtual nodes allowed: C_VIRT * ceil(log2 n)^2

Adjacency = dict[int, set[int]]


class OrientationError(ValueError):
    pass


def power_graph(g: WeightedGraph | Mapping[int, Iterable[int]], exponent: int = 2) -> Adjacency:
    """Unweighted graph joining every pair at hop distance 1..exponent."""
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    if isinstance(g, WeightedGraph):
        base = {v: set(g.neighbors(v)) for v in g.nodes}
    else:
        base = {v: set(nb) for v, nb in g.items()}
    out: Adjacency = {}
    for v in base:
        seen = {v}
        frontier = {v}
        for _ in range(exponent):
            frontier = {w for u in frontier for w in base[u]} - seen
            seen |= frontier
        out[v] = seen - {v}
    return out


def _bfs(adj: Adjacency, src: int, allowed: set[int] | None = None, limit: int | None = None) -> dict[int, int]:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if limit is not None and dist[u] >= limit:
            continue
        for w in adj[u]:
            if w not in dist and (allowed is None or w in allowed):
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


@dataclass
class NetworkDecomposition:
    cluster_of: dict[int, int]
    color_of_cluster: dict[int, int]
    clusters: dict[int, list[int]]
    diameters: dict[int, int]  # weak diameter per cluster, in the decomposed graph

    @property
    def colors(self) -> int:
        return len(set(self.color_of_cluster.values()))

    @property
    def max_diameter(self) -> int:
        return max(self.diameters.values(), default=0)

    def color(self, v: int) -> int:
        return self.color_of_cluster[self.cluster_of[v]]

    def clusters_of_color(self, c: int) -> list[int]:
        return sorted(cid for cid, col in self.color_of_cluster.items() if col == c)

    def export(self, path: str | Path | None = None) -> str:
        text = "".join(f"{v} {self.cluster_of[v]} {self.color(v)}\n" for v in sorted(self.cluster_of))
        if path is not None:
            Path(path).write_text(text)
        return text


def _geometric_radius(rng: random.Random, cap: int) -> int:
    r = 1
    while r < cap and rng.random() < 0.5:
        r += 1
    return r


def network_decomposition(adj: Adjacency, seed: int = 0, engine: HybridEngine | None = None,
                          phase: str = "euler.decomposition", max_phases: int | None = None) -> NetworkDecomposition:
    """Randomized ball carving, one color per carving phase.

    In each phase every remaining node draws a truncated geometric radius and
    a random priority.  Each remaining node looks up the top-priority center
    whose ball (in the graph induced on remaining nodes) covers it; it joins
    that center's cluster if it lies strictly inside the ball.  Clusters made
    in one phase are pairwise non-adjacent.  Each phase is charged
    ``2 * (cap + 1)`` local rounds on the host network (one step on the
    squared graph takes two host rounds).
    """
    nodes = sorted(adj)
    n = max(len(nodes), 2)
    cap = ceil_log2(n)
    remaining = set(nodes)
    cluster_of: dict[int, int] = {}
    color_of: dict[int, int] = {}
    members: dict[int, list[int]] = {}
    color = 0
    limit = max_phases if max_phases is not None else 64 * cap
    while remaining:
        color += 1
        if color > limit:
            raise RuntimeError("network decomposition did not finish")
        rng = random.Random(f"{seed}/decomp/{color}")
        radius = {v: _geometric_radius(rng, cap) for v in sorted(remaining)}
        prio = {v: (rng.random(), v) for v in sorted(remaining)}
        best: dict[int, tuple[tuple[float, int], int, int]] = {}
        for u in sorted(remaining, key=prio.__getitem__, reverse=True):
            for v, d in _bfs(adj, u, remaining, radius[u]).items():
                if v not in best:
                    best[v] = (prio[u], u, d)
        joined: dict[int, list[int]] = {}
        for v, (_, u, d) in best.items():
            if d < radius[u]:
                joined.setdefault(u, []).append(v)
        for u in sorted(joined):
            cid = len(members) + 1
            members[cid] = sorted(joined[u])
            color_of[cid] = color
            for v in joined[u]:
                cluster_of[v] = cid
                remaining.discard(v)
        if engine is not None:
            engine.charge_local(2 * (cap + 1), phase, {v: engine.bw.id_bits * len(adj[v]) for v in adj},
                                note=f"carving phase {color}")
    diam = {cid: _weak_diameter(adj, m) for cid, m in members.items()}
    return NetworkDecomposition(cluster_of, color_of, members, diam)


def _weak_diameter(adj: Adjacency, members: list[int]) -> int:
    best = 0
    for v in members:
        dist = _bfs(adj, v)
        best = max(best, max(dist.get(w, math.inf) for w in members))
    return best


def extend_cluster(decomp: NetworkDecomposition, cluster: int, g: WeightedGraph) -> set[int]:
    core = set(decomp.clusters[cluster])
    return core | {w for v in core for w in g.neighbors(v)}


@dataclass
class EulerInstance:
    """Host graph plus virtual nodes ``n+1 .. n+num_virtual`` and target edges ``H``.

    ``edges`` is a list of endpoint pairs; the list index is the edge id, so
    parallel edges between virtual nodes are allowed.
    """

    g: WeightedGraph
    num_virtual: int
    edges: list[tuple[int, int]]
    max_virtual: int | None = None

    def __post_init__(self):
        n = self.g.n
        bound = self.max_virtual if self.max_virtual is not None else C_VIRT * ceil_log2(n) ** 2
        if self.num_virtual > bound:
            raise OrientationError(f"{self.num_virtual} virtual nodes exceed the bound {bound}")
        top = n + self.num_virtual
        for a, b in self.edges:
            if not (1 <= a <= top and 1 <= b <= top) or a == b:
                raise OrientationError(f"invalid H edge ({a}, {b})")
            if a <= n and b <= n and not self.g.has_edge(a, b):
                raise OrientationError(f"H edge ({a}, {b}) is not an edge of the host graph")
        odd = [v for v, d in sorted(self.degrees().items()) if d % 2]
        if odd:
            raise OrientationError(f"node {odd[0]} has odd H-degree {self.degrees()[odd[0]]}")

    def degrees(self) -> dict[int, int]:
        deg: dict[int, int] = {}
        for a, b in self.edges:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        return deg

    def is_virtual(self, v: int) -> bool:
        return v > self.g.n

    def simulator(self, v: int) -> int:
        """Real node simulating ``v``: virtual nodes are dealt round-robin by id."""
        return v if v <= self.g.n else (v - self.g.n - 1) % self.g.n + 1


@dataclass
class Orientation:
    direction: dict[int, tuple[int, int]] = field(default_factory=dict)  # edge id -> (tail, head)
    total: int = 0

    @property
    def complete(self) -> bool:
        return len(self.direction) == self.total

    def degrees(self) -> tuple[dict[int, int], dict[int, int]]:
        indeg: dict[int, int] = {}
        outdeg: dict[int, int] = {}
        for t, h in self.direction.values():
            outdeg[t] = outdeg.get(t, 0) + 1
            indeg[h] = indeg.get(h, 0) + 1
        return indeg, outdeg

    def is_balanced(self) -> bool:
        indeg, outdeg = self.degrees()
        return all(indeg.get(v, 0) == outdeg.get(v, 0) for v in set(indeg) | set(outdeg))

    def export(self, path: str | Path | None = None) -> str:
        text = "".join(f"{t} {h}\n" for _, (t, h) in sorted(self.direction.items()))
        if path is not None:
            Path(path).write_text(text)
        return text


EdgeMap = Mapping[int, tuple[int, int]]


def _find_cycle(inc: dict[int, dict[int, int]], start: int) -> list[tuple[int, int, int]] | None:
    """DFS from ``start``; returns a cycle as ``(eid, tail, head)`` steps, or None."""
    pos = {start: 0}
    path_nodes = [start]
    path_edges: list[int] = []
    stacks = [iter(sorted(inc[start].items()))]
    while stacks:
        u = path_nodes[-1]
        advanced = False
        for eid, w in stacks[-1]:
            if path_edges and eid == path_edges[-1]:
                continue
            if w in pos:
                i = pos[w]
                cyc_nodes = path_nodes[i:] + [w]
                cyc_edges = path_edges[i:] + [eid]
                return [(e, cyc_nodes[j], cyc_nodes[j + 1]) for j, e in enumerate(cyc_edges)]
            pos[w] = len(path_nodes)
            path_nodes.append(w)
            path_edges.append(eid)
            stacks.append(iter(sorted(inc[w].items())))
            advanced = True
            break
        if not advanced:
            stacks.pop()
            del pos[path_nodes.pop()]
            if path_edges:
                path_edges.pop()
            if u == start:
                break
    return None


def _incidence(edges: EdgeMap) -> dict[int, dict[int, int]]:
    inc: dict[int, dict[int, int]] = {}
    for eid, (a, b) in edges.items():
        inc.setdefault(a, {})[eid] = b
        inc.setdefault(b, {})[eid] = a
    return inc


def orient_cluster_cycles(nodes: Iterable[int], edges: EdgeMap) -> tuple[dict[int, tuple[int, int]], dict[int, tuple[int, int]]]:
    """Peel cycles off the edges induced on ``nodes`` until a forest remains.

    Returns ``(oriented, remaining)``.  Each peeled cycle is directed one way
    round, so it adds one in and one out at each of its nodes.
    """
    inside = set(nodes)
    local = {e: ab for e, ab in edges.items() if ab[0] in inside and ab[1] in inside}
    inc = _incidence(local)
    oriented: dict[int, tuple[int, int]] = {}
    for v in sorted(inc):
        while inc[v]:
            cyc = _find_cycle(inc, v)
            if cyc is None:
                break
            for eid, t, h in cyc:
                oriented[eid] = (t, h)
                del inc[t][eid]
                del inc[h][eid]
    remaining = {e: ab for e, ab in local.items() if e not in oriented}
    return oriented, remaining


def orient_residual(edges: EdgeMap, arboricity: int = 1, engine: HybridEngine | None = None,
                    phase: str = "euler.residual") -> dict[int, tuple[int, int]]:
    """Orient an even-degree multigraph by walking closed trails.

    From the smallest node with unused edges, follow the smallest unused
    incident edge until the walk returns to its start; direct every edge the
    way it was walked.  Charged ``C_RES * arboricity * ceil(log n)`` rounds.
    """
    inc = _incidence(edges)
    for v in sorted(inc):
        if len(inc[v]) % 2:
            raise OrientationError(f"node {v} has odd residual degree {len(inc[v])}")
    out: dict[int, tuple[int, int]] = {}
    for start in sorted(inc):
        while inc[start]:
            u = start
            while True:
                eid = min(inc[u])
                w = inc[u].pop(eid)
                del inc[w][eid]
                out[eid] = (u, w)
                u = w
                if u == start:
                    break
    if engine is not None and edges:
        engine.charge(C_RES * max(1, arboricity) * engine.bw.log_n, phase, note="residual orientation")
    return out


@dataclass
class EulerResult:
    orientation: Orientation
    decomposition: NetworkDecomposition
    forests: dict[int, dict[int, tuple[int, int]]]  # color -> unoriented edges left in that color's clusters
    deferred: dict[int, tuple[int, int]]  # edges no extended cluster could see
    rounds: int


def euler_orient(inst: EulerInstance, seed: int = 0, engine: HybridEngine | None = None) -> EulerResult:
    engine = engine or HybridEngine(inst.g, HybridConfig(seed=seed))
    start = engine.round
    g = inst.g
    decomp = network_decomposition(power_graph(g), seed=seed, engine=engine)
    unoriented = dict(enumerate(inst.edges))
    sim = {v: inst.simulator(v) for e in inst.edges for v in e}
    orientation = Orientation(total=len(inst.edges))
    forests: dict[int, dict[int, tuple[int, int]]] = {}
    claimed: set[int] = set()
    colors = sorted(set(decomp.color_of_cluster.values()))
    for c in colors:
        cost = 0
        forests[c] = {}
        for cid in decomp.clusters_of_color(c):
            ext = extend_cluster(decomp, cid, g)
            # an edge is visible when both endpoints are simulated inside the extended cluster
            visible = {e: ab for e, ab in unoriented.items() if sim[ab[0]] in ext and sim[ab[1]] in ext}
            if not visible:
                continue
            mapped = {e: (ab[0], ab[1]) for e, ab in visible.items()}
            inside = {v for ab in mapped.values() for v in ab}
            done, left = orient_cluster_cycles(inside, mapped)
            orientation.direction.update(done)
            for e in done:
                del unoriented[e]
            for e, ab in left.items():
                if e not in claimed:
                    forests[c][e] = ab
                    claimed.add(e)
            cost = max(cost, 2 * (2 * decomp.diameters[cid] + 2))
        if cost:
            # clusters of one color run in parallel: charge the slowest one
            engine.charge(cost, "euler.cycles", note=f"color {c}")
    for c in forests:
        forests[c] = {e: ab for e, ab in forests[c].items() if e in unoriented}
    deferred = {e: ab for e, ab in unoriented.items() if e not in claimed}
    arb = sum(1 for f in forests.values() if f) + (1 if deferred else 0)
    orientation.direction.update(orient_residual(unoriented, arb, engine))
    return EulerResult(orientation, decomp, forests, deferred, engine.round - start)


def is_forest(edges: EdgeMap) -> bool:
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges.values():
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def random_eulerian_instance(g: WeightedGraph, seed: int, num_virtual: int = 0, cycles: int | None = None,
                             virtual_degree: int = 3) -> EulerInstance:
    """Symmetric difference of random cycles in the host graph plus virtual nodes.

    Each virtual node gets ``virtual_degree`` edges to random real nodes and
    one edge to the previous virtual node.  Cycles are fundamental cycles of
    a randomized BFS tree closed by a random non-tree edge.
    """
    rng = random.Random(f"euler-instance/{seed}")
    n = g.n
    pairs: list[tuple[int, int]] = [(u, v) for u, v, _ in g.edges()]
    for i in range(num_virtual):
        x = n + 1 + i
        for u in rng.sample(range(1, n + 1), min(virtual_degree, n)):
            pairs.append((u, x))
        if i:
            pairs.append((x - 1, x))
    adj: dict[int, list[tuple[int, int]]] = {}
    for eid, (a, b) in enumerate(pairs):
        adj.setdefault(a, []).append((b, eid))
        adj.setdefault(b, []).append((a, eid))
    count = cycles if cycles is not None else max(1, ceil_log2(n))
    chosen = [0] * len(pairs)
    for _ in range(count):
        root = rng.choice(sorted(adj))
        parent: dict[int, tuple[int, int] | None] = {root: None}
        q = deque([root])
        tree: set[int] = set()
        while q:
            u = q.popleft()
            nb = list(adj[u])
            rng.shuffle(nb)
            for w, eid in nb:
                if w not in parent:
                    parent[w] = (u, eid)
                    tree.add(eid)
                    q.append(w)
        non_tree = [eid for eid in range(len(pairs)) if eid not in tree]
        if not non_tree:
            break
        eid = rng.choice(non_tree)
        a, b = pairs[eid]
        cyc = {eid}
        anc_a = _path_to_root(parent, a)
        anc_b = _path_to_root(parent, b)
        common = set(anc_a) & set(anc_b)
        for path in (anc_a, anc_b):
            for node in path:
                if node in common:
                    break
                cyc.add(parent[node][1])
        for e in cyc:
            chosen[e] ^= 1
    edges = [pairs[e] for e in range(len(pairs)) if chosen[e]]
    used_virtual = num_virtual
    return EulerInstance(g, used_virtual, edges)


def _path_to_root(parent: Mapping[int, tuple[int, int] | None], v: int) -> list[int]:
    out = [v]
    while parent[v] is not None:
        v = parent[v][0]
        out.append(v)
    return out
