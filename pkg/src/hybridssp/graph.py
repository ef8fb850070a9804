"""Weighted undirected graphs, generators and exact sequential oracles.

Node ids are ``1..n``. Distances are Python ints; the unreachable marker is
``INF`` (``math.inf``), which absorbs additions instead of overflowing.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from heapq import heappop, heappush
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

INF = math.inf

GRAPH_KINDS = ("path", "cycle", "grid", "random-connected", "random-geometric")


class GraphError(ValueError):
    pass


class WeightedGraph:
    """Connected simple undirected graph with integer weights in ``[1, W]``."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int, int]], W: int | None = None):
        if n < 1:
            raise GraphError("graph needs at least one node")
        self.n = n
        self._adj: list[dict[int, int]] = [dict() for _ in range(n + 1)]
        max_w = 0
        for u, v, w in edges:
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphError(f"edge ({u}, {v}) has an unknown endpoint")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if v in self._adj[u]:
                raise GraphError(f"parallel edge ({u}, {v})")
            if int(w) != w or w < 1:
                raise GraphError(f"edge ({u}, {v}) has weight {w} outside [1, W]")
            self._adj[u][v] = int(w)
            self._adj[v][u] = int(w)
            max_w = max(max_w, int(w))
        self.W = W if W is not None else max(1, max_w)
        if max_w > self.W:
            raise GraphError(f"weight {max_w} exceeds W={self.W}")
        if not self._connected():
            raise GraphError("graph is not connected")

    def _connected(self) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    @property
    def nodes(self) -> range:
        return range(1, self.n + 1)

    @property
    def m(self) -> int:
        return sum(len(a) for a in self._adj) // 2

    def neighbors(self, v: int) -> dict[int, int]:
        """Neighbor -> weight mapping. Do not mutate."""
        return self._adj[v]

    def weight(self, u: int, v: int) -> int:
        return self._adj[u][v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def edges(self) -> Iterator[tuple[int, int, int]]:
        for u in range(1, self.n + 1):
            for v, w in sorted(self._adj[u].items()):
                if u < v:
                    yield u, v, w

    def edge_set(self) -> set[tuple[int, int]]:
        return {(u, v) for u, v, _ in self.edges()}

    def check_node(self, v: int) -> None:
        if not (isinstance(v, (int, np.integer)) and 1 <= v <= self.n):
            raise GraphError(f"unknown node id {v!r}")

    def to_edgelist(self) -> str:
        lines = [f"{self.n} {self.m} {self.W}"]
        lines += [f"{u} {v} {w}" for u, v, w in self.edges()]
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.n == other.n and self.W == other.W and list(self.edges()) == list(other.edges())

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m}, W={self.W})"


def save_edgelist(g: WeightedGraph, path: str | Path) -> None:
    Path(path).write_text(g.to_edgelist())


def load_edgelist(path: str | Path) -> WeightedGraph:
    """Read the ``n m W`` header plus ``u v w`` lines; invariants are revalidated."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise GraphError("missing 'n m W' header")
    n, m, W = (int(t) for t in rows[0])
    edges = [(int(a), int(b), int(c)) for a, b, c in rows[1:]]
    if len(edges) != m:
        raise GraphError(f"header announces {m} edges, file has {len(edges)}")
    return WeightedGraph(n, edges, W=W)


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    n: int
    weight_range: tuple[int, int] | None = None  # default (1, n**2)
    seed: int = 0
    p: float = 0.1  # random-connected edge probability
    radius: float | None = None  # random-geometric connection radius
    rows: int | None = None  # grid rows; default isqrt(n)

    def resolved_weights(self) -> tuple[int, int]:
        if self.weight_range is None:
            return 1, max(1, self.n * self.n)
        return self.weight_range


def _grid_shape(spec: GraphSpec) -> tuple[int, int]:
    rows = spec.rows or math.isqrt(spec.n)
    if rows < 1 or spec.n % rows:
        raise GraphError(f"grid with n={spec.n} needs rows dividing n")
    return rows, spec.n // rows


def default_geometric_radius(n: int) -> float:
    # 1.5x the connectivity threshold of the unit-square geometric graph
    return 1.5 * math.sqrt(math.log(n) / (math.pi * n))


def _geometric_pairs(n: int, radius: float, rng: np.random.Generator) -> set[tuple[int, int]]:
    from scipy.sparse.csgraph import minimum_spanning_tree
    from scipy.spatial import cKDTree
    from scipy.spatial.distance import pdist, squareform

    pts = rng.random((n, 2))
    pairs = {(int(a) + 1, int(b) + 1) for a, b in cKDTree(pts).query_pairs(radius)}
    # Euclidean MST edges force connectivity without long-range shortcuts
    mst = minimum_spanning_tree(squareform(pdist(pts))).tocoo()
    for a, b in zip(mst.row, mst.col):
        a, b = int(a) + 1, int(b) + 1
        pairs.add((min(a, b), max(a, b)))
    return pairs


def generate_graph(spec: GraphSpec) -> WeightedGraph:
    """Deterministic connected graph for ``spec``; same spec gives the same graph."""
    n = spec.n
    if spec.kind not in GRAPH_KINDS:
        raise GraphError(f"unknown generator kind {spec.kind!r}")
    if n < 2:
        raise GraphError("generators need n >= 2")
    lo, hi = spec.resolved_weights()
    if lo < 1 or hi < lo:
        raise GraphError(f"empty or invalid weight range ({lo}, {hi})")

    rng = random.Random(spec.seed)
    pairs: set[tuple[int, int]] = set()
    if spec.kind == "path":
        pairs = {(i, i + 1) for i in range(1, n)}
    elif spec.kind == "cycle":
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        pairs = {(i, i + 1) for i in range(1, n)} | {(1, n)}
    elif spec.kind == "grid":
        rows, cols = _grid_shape(spec)
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c + 1
                if c + 1 < cols:
                    pairs.add((v, v + 1))
                if r + 1 < rows:
                    pairs.add((v, v + cols))
    elif spec.kind == "random-connected":
        order = list(range(1, n + 1))
        rng.shuffle(order)
        for i in range(1, n):
            a, b = order[i], order[rng.randrange(i)]
            pairs.add((min(a, b), max(a, b)))
        for u in range(1, n + 1):
            for v in range(u + 1, n + 1):
                if rng.random() < spec.p:
                    pairs.add((u, v))
    else:
        radius = spec.radius if spec.radius is not None else default_geometric_radius(n)
        pairs = _geometric_pairs(n, radius, np.random.default_rng(spec.seed))

    edges = [(u, v, rng.randint(lo, hi)) for u, v in sorted(pairs)]
    return WeightedGraph(n, edges, W=hi)


@dataclass
class DistanceVector:
    source: int
    entries: dict[int, float] = field(default_factory=dict)

    def __getitem__(self, v: int) -> float:
        return self.entries.get(v, INF)

    def as_list(self, n: int | None = None) -> list[float]:
        n = n if n is not None else max(self.entries, default=0)
        return [self.entries.get(v, INF) for v in range(1, n + 1)]


def dijkstra_oracle(g: WeightedGraph, source: int) -> DistanceVector:
    g.check_node(source)
    dist: dict[int, float] = {v: INF for v in g.nodes}
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, u = heappop(heap)
        if d > dist[u]:
            continue
        for v, w in g.neighbors(u).items():
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heappush(heap, (nd, v))
    return DistanceVector(source, dist)


def hop_limited_distances(g: WeightedGraph, source: int, h: int) -> DistanceVector:
    """``h`` rounds of Bellman-Ford from ``source``: exactly ``d_{G,h}``.

    Only entries improved in the previous round are relaxed, which yields the
    same values as full relaxation.
    """
    g.check_node(source)
    if h < 1:
        raise GraphError("hop limit must be >= 1")
    dist: dict[int, float] = {v: INF for v in g.nodes}
    dist.update(_hop_limited(g, source, h))
    return DistanceVector(source, dist)


def _hop_limited(g: WeightedGraph, source: int, h: int) -> dict[int, int]:
    dist = {source: 0}
    frontier = {source: 0}
    adj = g._adj
    for _ in range(h):
        nxt: dict[int, int] = {}
        for u, du in frontier.items():
            for v, w in adj[u].items():
                nd = du + w
                if nd < dist.get(v, INF) and nd < nxt.get(v, INF):
                    nxt[v] = nd
        if not nxt:
            break
        # candidates are computed from round-(r-1) values only
        for v, nd in nxt.items():
            dist[v] = nd
        frontier = nxt
    return dist


def hop_limited_table(g: WeightedGraph, sources: Iterable[int], h: int) -> dict[int, dict[int, int]]:
    """``{s: {v: d_{G,h}(s, v)}}`` restricted to finite entries."""
    return {s: _hop_limited(g, s, h) for s in sources}


def bfs_hops(g: WeightedGraph, source: int, limit: int | None = None) -> dict[int, int]:
    hops = {source: 0}
    queue = deque([source])
    adj = g._adj
    while queue:
        u = queue.popleft()
        hu = hops[u]
        if limit is not None and hu >= limit:
            continue
        for v in adj[u]:
            if v not in hops:
                hops[v] = hu + 1
                queue.append(v)
    return hops


def hop_distance(g: WeightedGraph, u: int, v: int) -> int:
    g.check_node(u)
    g.check_node(v)
    if u == v:
        return 0
    return bfs_hops(g, u)[v]


def graph_diameter(g: WeightedGraph) -> int:
    return max(max(bfs_hops(g, s).values()) for s in g.nodes)
