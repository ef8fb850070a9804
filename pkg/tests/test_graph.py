import math
import random

import pytest
from hypothesis import given, strategies as st

from hybridssp.graph import (INF, GraphError, GraphSpec, WeightedGraph, dijkstra_oracle, generate_graph,
                             graph_diameter, hop_distance, hop_limited_distances, load_edgelist, save_edgelist)
from oracles import UnionFind, all_pairs_hops, bellman_ford


def unit_path(n):
    return WeightedGraph(n, [(i, i + 1, 1) for i in range(1, n)])


def test_path_generator_is_fixed():
    g = generate_graph(GraphSpec("path", 3, weight_range=(1, 1)))
    assert g.edge_set() == {(1, 2), (2, 3)}


def test_cycle_generator():
    g = generate_graph(GraphSpec("cycle", 4, weight_range=(1, 1)))
    assert g.edge_set() == {(1, 2), (2, 3), (3, 4), (1, 4)}


def test_random_connected_is_connected_by_union_find():
    g = generate_graph(GraphSpec("random-connected", 64, p=0.1, seed=7))
    uf = UnionFind(range(1, 65))
    for u, v, _ in g.edges():
        uf.union(u, v)
    assert len(uf.groups()) == 1


@pytest.mark.parametrize("kind", ["path", "cycle", "grid", "random-connected", "random-geometric"])
def test_generators_reproducible(kind):
    spec = GraphSpec(kind, 36, seed=5)
    assert generate_graph(spec).to_edgelist() == generate_graph(spec).to_edgelist()


def test_generator_rejects_bad_input():
    with pytest.raises(GraphError):
        generate_graph(GraphSpec("path", 1))
    with pytest.raises(GraphError):
        generate_graph(GraphSpec("path", 5, weight_range=(4, 2)))


def test_default_weights_are_at_most_n_squared():
    g = generate_graph(GraphSpec("random-connected", 20, seed=1))
    assert g.W == 400 and all(1 <= w <= 400 for *_, w in g.edges())


def test_invariants_enforced():
    with pytest.raises(GraphError):
        WeightedGraph(3, [(1, 2, 1)])  # disconnected
    with pytest.raises(GraphError):
        WeightedGraph(2, [(1, 1, 1), (1, 2, 1)])
    with pytest.raises(GraphError):
        WeightedGraph(2, [(1, 2, 0)])
    with pytest.raises(GraphError):
        WeightedGraph(2, [(1, 2, 1), (2, 1, 3)])


def test_edgelist_roundtrip(tmp_path):
    g = generate_graph(GraphSpec("grid", 16, seed=2))
    path = tmp_path / "g.txt"
    save_edgelist(g, path)
    assert path.read_text().splitlines()[0] == f"16 {g.m} {g.W}"
    assert load_edgelist(path) == g


def test_edgelist_header_mismatch(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("3 3 5\n1 2 1\n2 3 1\n")
    with pytest.raises(GraphError):
        load_edgelist(path)


def test_dijkstra_on_weighted_path():
    g = WeightedGraph(3, [(1, 2, 5), (2, 3, 2)])
    assert dijkstra_oracle(g, 1).as_list() == [0, 5, 7]


def test_dijkstra_unknown_source():
    with pytest.raises(GraphError):
        dijkstra_oracle(unit_path(3), 9)


def test_dijkstra_matches_bellman_ford():
    g = generate_graph(GraphSpec("random-connected", 32, seed=3))
    assert dijkstra_oracle(g, 1).as_list() == bellman_ford(32, list(g.edges()), 1)


def test_hop_limited_examples():
    assert hop_limited_distances(unit_path(4), 1, 2).as_list() == [0, 1, 2, INF]
    tri = WeightedGraph(3, [(1, 2, 1), (2, 3, 1), (1, 3, 5)])
    assert hop_limited_distances(tri, 1, 1).as_list() == [0, 1, 5]
    with pytest.raises(GraphError):
        hop_limited_distances(tri, 1, 0)


def test_hop_limited_matches_bounded_bellman_ford():
    g = generate_graph(GraphSpec("random-connected", 40, p=0.08, seed=9))
    for h in (1, 2, 3, 5, 39):
        assert hop_limited_distances(g, 4, h).as_list(40) == bellman_ford(40, list(g.edges()), 4, rounds=h)


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 6))
def test_hop_limit_monotone_and_converges(seed, h1, dh):
    g = generate_graph(GraphSpec("random-connected", 14, p=0.15, seed=seed))
    a = hop_limited_distances(g, 1, h1).as_list(14)
    b = hop_limited_distances(g, 1, h1 + dh).as_list(14)
    assert all(x >= y for x, y in zip(a, b))
    assert hop_limited_distances(g, 1, 13).as_list(14) == dijkstra_oracle(g, 1).as_list(14)


@given(st.integers(0, 10_000))
def test_triangle_inequality(seed):
    g = generate_graph(GraphSpec("random-connected", 12, p=0.2, seed=seed))
    d = {s: dijkstra_oracle(g, s) for s in g.nodes}
    rng = random.Random(seed)
    for _ in range(30):
        a, b, c = (rng.randint(1, 12) for _ in range(3))
        assert d[a][c] <= d[a][b] + d[b][c]


def test_hop_distance_and_diameter():
    assert hop_distance(unit_path(3), 2, 2) == 0
    assert hop_distance(unit_path(3), 1, 3) == 2
    grid = generate_graph(GraphSpec("grid", 16))
    assert hop_distance(grid, 1, 16) == 6
    cyc = generate_graph(GraphSpec("cycle", 4))
    assert graph_diameter(cyc) == 2
    assert graph_diameter(unit_path(5)) == 4


def test_diameter_matches_all_pairs_bfs():
    g = generate_graph(GraphSpec("random-connected", 32, seed=3))
    hops = all_pairs_hops(32, list(g.edges()))
    assert graph_diameter(g) == max(max(d.values()) for d in hops.values())


def test_infinity_absorbs_addition():
    assert INF + 5 == INF and math.isinf(INF)
