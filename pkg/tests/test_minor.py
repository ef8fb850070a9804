import math
import random

import pytest
from hypothesis import given, strategies as st

from hybridssp.engine import HybridConfig, HybridEngine
from hybridssp.graph import INF, GraphSpec, WeightedGraph, generate_graph
from hybridssp.minor import (MAX, MIN, OR, SUM, aggregate, all_choices, build_overlay_tree, consensus, contract,
                             ma_round)
from oracles import UnionFind

C_ROUND = 4  # rounds per ma_round <= C_ROUND * ceil(log2 n)^2, fixed after one measurement on n=64


def path3():
    return WeightedGraph(3, [(1, 2, 1), (2, 3, 1)])


def random_choices(g, seed, p=0.5):
    rng = random.Random(seed)
    return {(u, v): rng.random() < p for u, v, _ in g.edges()}


def far_y(a, b, w, ya, yb):
    return yb


def test_contract_path():
    m = contract(path3(), {(1, 2): True, (2, 3): False})
    assert m.supernodes == [frozenset({1, 2}), frozenset({3})]
    assert m.cross_edges == [(2, 3, 1)]


def test_contract_all_bot_is_identity():
    g = generate_graph(GraphSpec("grid", 16))
    m = contract(g, all_choices(g, False))
    assert m.supernodes == [frozenset({v}) for v in g.nodes]
    assert m.cross_edges == list(g.edges())


def test_contract_matches_union_find():
    g = generate_graph(GraphSpec("random-connected", 32, seed=5))
    ch = random_choices(g, 9)
    uf = UnionFind(g.nodes)
    for (u, v), c in ch.items():
        if c:
            uf.union(u, v)
    m = contract(g, ch)
    assert m.supernodes == uf.groups()
    expected = [(u, v, w) for u, v, w in g.edges() if uf.find(u) != uf.find(v)]
    assert m.cross_edges == expected


def test_contract_requires_all_choices():
    with pytest.raises(KeyError):
        contract(path3(), {(1, 2): True})


def test_parallel_cross_edges_kept():
    g = WeightedGraph(4, [(1, 2, 1), (3, 4, 1), (1, 3, 2), (2, 4, 3)])
    m = contract(g, {(1, 2): True, (3, 4): True, (1, 3): False, (2, 4): False})
    assert len(m.supernodes) == 2 and len(m.cross_edges) == 2


@pytest.mark.parametrize("size,depth", [(1, 0), (7, 3), (100, 7)])
def test_overlay_tree_shape(size, depth):
    members = list(range(1, size + 1))
    tree = build_overlay_tree(members, [(i, i + 1) for i in range(1, size)])
    assert tree.depth <= depth
    assert tree.depth <= math.ceil(math.log2(max(size, 1))) + 1
    if size > 1:
        assert tree.max_degree() <= 3
    assert tree.root == 1 and sorted(tree.parent) == members


def test_overlay_tree_rejects_disconnected():
    with pytest.raises(ValueError):
        build_overlay_tree([1, 2, 3], [(1, 2)])


def test_consensus_examples():
    g = WeightedGraph(2, [(1, 2, 1)])
    m = contract(g, {(1, 2): True})
    assert consensus(m, {1: 3, 2: 7}, MIN) == {1: 3, 2: 3}
    single = contract(g, {(1, 2): False})
    assert consensus(single, {1: 3, 2: 7}, MIN) == {1: 3, 2: 7}


def test_consensus_sum_matches_fold():
    g = generate_graph(GraphSpec("path", 20, seed=1))
    m = contract(g, all_choices(g, True))
    rng = random.Random(2)
    x = {v: rng.randint(0, 100) for v in g.nodes}
    assert set(consensus(m, x, SUM).values()) == {sum(x.values())}


@given(st.permutations(list(range(1, 9))))
def test_consensus_independent_of_order(order):
    g = generate_graph(GraphSpec("cycle", 8))
    m = contract(g, {(u, v): u % 2 == 1 for u, v, _ in g.edges()})
    x = {v: (v * 37) % 11 for v in order}
    assert consensus(m, x, MAX) == consensus(m, dict(sorted(x.items())), MAX)


def test_operator_domain_checked():
    g = WeightedGraph(2, [(1, 2, 1)])
    with pytest.raises(TypeError):
        consensus(contract(g, {(1, 2): True}), {1: 1, 2: 0}, OR)


def test_aggregate_examples():
    m = contract(path3(), {(1, 2): True, (2, 3): False})
    assert aggregate(m, {(2, 3): 5, (3, 2): 9}, MIN) == {1: 5, 2: 5, 3: 9}
    lone = contract(WeightedGraph(2, [(1, 2, 1)]), {(1, 2): True})
    assert aggregate(lone, {}, MIN) == {1: INF, 2: INF}
    with pytest.raises(KeyError):
        aggregate(m, {(2, 3): 5}, MIN)


def test_aggregate_star_sum():
    g = generate_graph(GraphSpec("random-connected", 16, seed=4))
    ch = {(u, v): u == 1 or v == 1 for u, v, _ in g.edges()}
    m = contract(g, ch)
    z = {}
    for u, v, w in m.cross_edges:
        z[(u, v)] = w
        z[(v, u)] = 2 * w
    got = aggregate(m, z, SUM)
    for idx, s in enumerate(m.supernodes):
        want = sum(val for (a, _), val in z.items() if m.supernode_of[a] == idx)
        assert {got[v] for v in s} == {want}


def test_ma_round_path_example():
    g = path3()
    eng = HybridEngine(g, HybridConfig(gamma=200))
    res = ma_round(g, {(1, 2): True, (2, 3): False}, {1: 1, 2: 2, 3: 3}, MIN, far_y, MIN, eng)
    assert res.y == {1: 1, 2: 1, 3: 3}
    assert res.aggregate[1] == res.aggregate[2] == 3
    phases = eng.ledger.phase_rounds()
    assert set(phases) == {"ma.contract", "ma.consensus", "ma.aggregate"}


def test_ma_round_all_bot():
    g = generate_graph(GraphSpec("grid", 64, seed=3))
    x = {v: (v * 13) % 50 for v in g.nodes}
    res = ma_round(g, all_choices(g, False), x, MIN, far_y, MIN, HybridEngine(g))
    assert res.y == x


@given(st.integers(0, 10_000), st.sampled_from([MIN, MAX, SUM]), st.floats(0, 1))
def test_simulated_round_equals_sequential(seed, op, p):
    g = generate_graph(GraphSpec("random-connected", 64, p=0.05, seed=seed))
    ch = random_choices(g, seed + 1, p)
    rng = random.Random(seed)
    x = {v: rng.randint(0, 1000) for v in g.nodes}
    eng = HybridEngine(g)  # standard cap, strict mode
    res = ma_round(g, ch, x, op, lambda a, b, w, ya, yb: min(ya, yb) + w, MIN, eng)
    m = contract(g, ch)
    y = consensus(m, x, op)
    z = {}
    for u, v, w in m.cross_edges:
        z[(u, v)] = min(y[u], y[v]) + w
        z[(v, u)] = min(y[u], y[v]) + w
    assert res.y == y
    assert res.aggregate == aggregate(m, z, MIN)
    assert eng.ledger.max_global_sent() <= eng.bw.gamma_bits


def test_wide_values_rejected():
    g = generate_graph(GraphSpec("path", 8))
    eng = HybridEngine(g, HybridConfig(gamma=500))
    x = {v: 2 ** 40 for v in g.nodes}
    with pytest.raises(ValueError):
        ma_round(g, all_choices(g, True), x, MIN, far_y, MIN, eng)


def test_repeated_rounds_polylog_budget():
    g = generate_graph(GraphSpec("random-connected", 64, seed=8))
    eng = HybridEngine(g)
    for i in range(10):
        ma_round(g, random_choices(g, i), {v: v for v in g.nodes}, MIN, far_y, MIN, eng)
    assert len(eng.ledger) <= 10 * C_ROUND * math.ceil(math.log2(64)) ** 2
