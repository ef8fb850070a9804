"""Minor-Aggregation rounds: contraction, consensus, aggregation.

``contract``, ``consensus`` and ``aggregate`` are the direct sequential
semantics.  ``ma_round`` executes one round on a :class:`HybridEngine`:
overlay trees per supernode (construction charged, see
:func:`build_overlay_tree`), converge-cast and broadcast over those trees as
real global messages, and the endpoint exchange of consensus values across
every cross edge as one round of local messages.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .engine import HybridConfig, HybridEngine, Message, RoundContext
from .graph import INF, WeightedGraph

C_OVERLAY = 2


@dataclass(frozen=True)
class AggregationOperator:
    name: str
    identity: Any
    combine: Callable[[Any, Any], Any]
    accepts: Callable[[Any], bool] = lambda v: True

    def fold(self, values: Iterable[Any]) -> Any:
        acc = self.identity
        for v in values:
            if not self.accepts(v):
                raise TypeError(f"value {v!r} is outside the domain of operator {self.name}")
            acc = self.combine(acc, v)
        return acc


def _numeric(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


MIN = AggregationOperator("min", INF, min, _numeric)
MAX = AggregationOperator("max", -INF, max, _numeric)
SUM = AggregationOperator("sum", 0, lambda a, b: a + b, _numeric)
OR = AggregationOperator("or", False, lambda a, b: a or b, lambda v: isinstance(v, bool))
OPERATORS = {op.name: op for op in (MIN, MAX, SUM, OR)}


def value_width(v: Any) -> int:
    """Encoded bits of a consensus/aggregation value (per scalar field)."""
    if isinstance(v, bool) or v is None:
        return 1
    if isinstance(v, float) and math.isinf(v):
        return 2
    if isinstance(v, int):
        return abs(v).bit_length() + 1
    if isinstance(v, tuple):
        return max((value_width(x) for x in v), default=1)
    raise TypeError(f"unsupported value {v!r}")


def value_fields(v: Any) -> int:
    return len(v) if isinstance(v, tuple) else 1


Edge = tuple[int, int]
ContractionChoice = Mapping[Edge, bool]  # (u, v) with u < v  ->  True means contract


@dataclass
class MinorNetwork:
    supernodes: list[frozenset[int]]
    supernode_of: dict[int, int]
    cross_edges: list[tuple[int, int, int]]  # original (u, v, w), u < v, distinct supernodes
    top_edges: list[tuple[int, int]] = field(default_factory=list)

    def members(self, s: int) -> frozenset[int]:
        return self.supernodes[s]

    def incident(self, s: int) -> list[tuple[int, int, int]]:
        return [e for e in self.cross_edges if self.supernode_of[e[0]] == s or self.supernode_of[e[1]] == s]


def _find(parent: dict[int, int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def contract(g: WeightedGraph, choices: ContractionChoice) -> MinorNetwork:
    parent = {v: v for v in g.nodes}
    top: list[tuple[int, int]] = []
    for u, v, _ in g.edges():
        if (u, v) not in choices:
            raise KeyError(f"edge ({u}, {v}) has no contraction choice")
        if choices[(u, v)]:
            top.append((u, v))
            a, b = _find(parent, u), _find(parent, v)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for v in g.nodes:
        groups.setdefault(_find(parent, v), []).append(v)
    supernodes = sorted((frozenset(m) for m in groups.values()), key=min)
    supernode_of = {v: i for i, s in enumerate(supernodes) for v in s}
    cross = [(u, v, w) for u, v, w in g.edges() if supernode_of[u] != supernode_of[v]]
    return MinorNetwork(supernodes, supernode_of, cross, top)


def all_choices(g: WeightedGraph, flag: bool) -> dict[Edge, bool]:
    return {(u, v): flag for u, v, _ in g.edges()}


@dataclass
class OverlayTree:
    root: int
    parent: dict[int, int | None]
    children: dict[int, list[int]]
    depth: int

    @property
    def members(self) -> list[int]:
        return sorted(self.parent)

    def max_degree(self) -> int:
        return max(len(c) + (self.parent[v] is not None) for v, c in self.children.items())

    def child_index(self, v: int) -> int:
        p = self.parent[v]
        return 0 if p is None else self.children[p].index(v)


def build_overlay_tree(members: Iterable[int], top_edges: Iterable[Edge] = ()) -> OverlayTree:
    """Balanced binary tree over ``members`` in id order (heap layout).

    Degree is at most 3 and depth ``floor(log2 |members|)``.  The member set
    must be connected through ``top_edges``.
    """
    order = sorted(set(members))
    if not order:
        raise ValueError("empty member set")
    inside = set(order)
    adj: dict[int, list[int]] = {v: [] for v in order}
    for u, v in top_edges:
        if u in inside and v in inside:
            adj[u].append(v)
            adj[v].append(u)
    seen, stack = {order[0]}, [order[0]]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != len(order):
        raise ValueError("overlay members are not connected by contracted edges")
    parent: dict[int, int | None] = {}
    children: dict[int, list[int]] = {v: [] for v in order}
    for i, v in enumerate(order):
        if i == 0:
            parent[v] = None
        else:
            p = order[(i - 1) // 2]
            parent[v] = p
            children[p].append(v)
    depth = int(math.floor(math.log2(len(order))))
    return OverlayTree(order[0], parent, children, depth)


def consensus(minor: MinorNetwork, x: Mapping[int, Any], op: AggregationOperator) -> dict[int, Any]:
    y_super = [op.fold(x[v] for v in sorted(s)) for s in minor.supernodes]
    return {v: y_super[minor.supernode_of[v]] for v in minor.supernode_of}


def aggregate(minor: MinorNetwork, z: Mapping[tuple[int, int], Any], op: AggregationOperator) -> dict[int, Any]:
    """``z[(a, b)]`` is the value of cross edge ``{a, b}`` for the side of endpoint ``a``."""
    per_super: list[list[Any]] = [[] for _ in minor.supernodes]
    for u, v, _ in minor.cross_edges:
        for a, b in ((u, v), (v, u)):
            if (a, b) not in z:
                raise KeyError(f"missing z value for cross edge ({u}, {v}) at the side of {a}")
            per_super[minor.supernode_of[a]].append(z[(a, b)])
    folded = [op.fold(vals) for vals in per_super]
    return {v: folded[minor.supernode_of[v]] for v in minor.supernode_of}


# -- simulation on the hybrid engine ------------------------------------------------


class TreeCastProgram:
    """Converge-cast ``op`` up an overlay tree, then broadcast the result down.

    With room for only one message per round, siblings alternate rounds on
    the way up and a parent serves one child per round on the way down.
    """

    def __init__(self, trees: Mapping[int, OverlayTree], tree_of: Mapping[int, int],
                 values: Mapping[int, Any], op: AggregationOperator, capacity: int):
        self.trees = trees
        self.tree_of = tree_of
        self.values = values
        self.op = op
        self.slots = 1 if capacity >= 2 else 2
        self.per_round = 2 if capacity >= 2 else 1

    def init(self, v: int) -> dict:
        t = self.trees[self.tree_of[v]]
        return {"acc": self.op.fold([self.values[v]]), "waiting": len(t.children[v]), "sent_up": False,
                "result": None, "to_send": None}

    def _bits(self, ctx: RoundContext, value: Any) -> int:
        if value_width(value) > ctx.bw.value_bits:
            raise ValueError(f"value {value!r} wider than {ctx.bw.value_bits} bits")
        return ctx.bw.msg_bits(value_fields(value))

    def step(self, st: dict, ctx: RoundContext) -> tuple[dict, bool]:
        v = ctx.node
        t = self.trees[self.tree_of[v]]
        for m in ctx.global_inbox:
            kind, val = m.payload
            if kind == "up":
                st["acc"] = self.op.combine(st["acc"], val)
                st["waiting"] -= 1
            else:
                st["result"] = val
                st["to_send"] = list(t.children[v])
        if st["result"] is None and st["waiting"] == 0:
            if t.parent[v] is None:
                st["result"] = st["acc"]
                st["to_send"] = list(t.children[v])
            elif not st["sent_up"] and ctx.round % self.slots == t.child_index(v) % self.slots:
                ctx.send_global(t.parent[v], ("up", st["acc"]), self._bits(ctx, st["acc"]))
                st["sent_up"] = True
        if st["to_send"]:
            for c in st["to_send"][: self.per_round]:
                ctx.send_global(c, ("down", st["result"]), self._bits(ctx, st["result"]))
            st["to_send"] = st["to_send"][self.per_round:]
        waiting_slot = st["result"] is None and st["waiting"] == 0 and not st["sent_up"]
        done = st["result"] is not None and not st["to_send"]
        return st, done or (not waiting_slot and st["result"] is None)


@dataclass
class MARoundResult:
    y: dict[int, Any]
    aggregate: dict[int, Any]
    minor: MinorNetwork
    rounds: int


def charge_overlay_construction(engine: HybridEngine, trees: Mapping[int, OverlayTree], phase: str) -> None:
    """Charge ``C_OVERLAY * ceil(log n)`` rounds; tree links are announced for real.

    Each member sends one join message to its overlay parent, siblings in
    different rounds, so the announcement traffic obeys the global caps.
    """
    bw = engine.bw
    budget = C_OVERLAY * bw.log_n
    bits = bw.header_bits + bw.id_bits
    waves: list[list[Message]] = [[], []]
    for t in trees.values():
        for v, p in t.parent.items():
            if p is not None:
                waves[t.child_index(v) % 2].append(Message(v, p, ("join", v), bits))
    used = 0
    for wave in waves:
        if wave:
            engine.transmit(global_msgs=wave, phase=phase, note="overlay join")
            used += 1
    engine.charge(budget - used, phase, note="overlay construction")


def ma_round(g: WeightedGraph, choices: ContractionChoice, x: Mapping[int, Any], consensus_op: AggregationOperator,
             z_fn: Callable[[int, int, int, Any, Any], Any], agg_op: AggregationOperator,
             engine: HybridEngine | None = None, phase: str = "ma") -> MARoundResult:
    """One simulated Minor-Aggregation round.

    ``z_fn(a, b, w, y_a, y_b)`` gives the value of cross edge ``{a, b}``
    (weight ``w``) for the side of endpoint ``a``; each endpoint simulates the
    edge for its own side after learning the other side's consensus value.
    """
    engine = engine or HybridEngine(g, HybridConfig())
    start = engine.round
    minor = contract(g, choices)
    trees = {i: build_overlay_tree(s, minor.top_edges) for i, s in enumerate(minor.supernodes)}
    charge_overlay_construction(engine, trees, f"{phase}.contract")
    cap = engine.bw.capacity

    res = engine.run_until_halt(TreeCastProgram(trees, minor.supernode_of, x, consensus_op, cap),
                                phase=f"{phase}.consensus")
    y = {v: st["result"] for v, st in res.states.items()}

    # endpoint exchange across every cross edge, one local round
    bw = engine.bw
    exchange = []
    for u, v, _ in minor.cross_edges:
        exchange.append(Message(u, v, y[u], bw.msg_bits(value_fields(y[u]))))
        exchange.append(Message(v, u, y[v], bw.msg_bits(value_fields(y[v]))))
    engine.transmit(local_msgs=exchange, phase=f"{phase}.aggregate", note="endpoint exchange")
    heard = {(m.dst, m.src): m.payload for m in exchange}

    local_fold: dict[int, Any] = {v: agg_op.identity for v in g.nodes}
    for u, v, w in minor.cross_edges:
        for a, b in ((u, v), (v, u)):
            local_fold[a] = agg_op.combine(local_fold[a], z_fn(a, b, w, y[a], heard[(a, b)]))
    res = engine.run_until_halt(TreeCastProgram(trees, minor.supernode_of, local_fold, agg_op, cap),
                                phase=f"{phase}.aggregate")
    agg = {v: st["result"] for v, st in res.states.items()}
    return MARoundResult(y, agg, minor, engine.round - start)
