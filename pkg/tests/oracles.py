"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import math
from collections import deque


def bellman_ford(n, edges, source, rounds=None):
    """Textbook Bellman-Ford with full relaxation; ``rounds`` limits the hop count."""
    dist = [math.inf] * (n + 1)
    dist[source] = 0
    for _ in range(rounds if rounds is not None else n - 1):
        new = dist[:]
        for u, v, w in edges:
            if dist[u] + w < new[v]:
                new[v] = dist[u] + w
            if dist[v] + w < new[u]:
                new[u] = dist[v] + w
        if new == dist:
            break
        dist = new
    return dist[1:]


class UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def groups(self):
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), set()).add(x)
        return sorted((frozenset(s) for s in out.values()), key=min)


def all_pairs_hops(n, edges):
    adj = {v: set() for v in range(1, n + 1)}
    for u, v, *_ in edges:
        adj[u].add(v)
        adj[v].add(u)
    out = {}
    for s in adj:
        dist = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    q.append(w)
        out[s] = dist
    return out
