"""Running many skeleton algorithms at once by delegating them to helpers.

Every skeleton node ``u`` hands its ``k`` algorithm copies to the helpers in
``H_u`` in contiguous blocks of ``l = ceil(k / min |H_u|)``.  One simulated
round then costs a fixed local window (long enough for a skeleton-edge
message to travel helper -> u -> u' -> helper) plus however many physical
rounds the helpers need to push the round's global messages through their
send and receive caps.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .engine import HybridConfig, HybridEngine, Message, NodeProgram, RoundLimitExceeded, RunState
from .graph import WeightedGraph, bfs_hops
from .skeleton import HelperFamily, SkeletonGraph


@dataclass
class SkeletonAlgorithm:
    """One algorithm copy over the skeleton topology.

    ``program`` is a node program (or per-node mapping) that talks only to
    skeleton neighbors locally and to skeleton nodes globally.
    """

    algo_id: int
    program: NodeProgram | Mapping[int, NodeProgram]
    T: int
    seed: int = 0
    name: str = ""


@dataclass
class HelperAssignment:
    helpers: dict[int, tuple[int, ...]]  # skeleton node -> helpers in ascending id order
    ell: int
    k: int
    radius: dict[tuple[int, int], int] = field(default_factory=dict)  # (u, helper) -> hop(u, helper)

    def helper_index(self, i: int) -> int:
        """1-based index ``j`` of the helper that runs algorithm ``i`` (1-based)."""
        if not 1 <= i <= self.k:
            raise ValueError(f"algorithm index {i} outside 1..{self.k}")
        return math.ceil(i / self.ell)

    def helper(self, u: int, i: int) -> int:
        return self.helpers[u][self.helper_index(i) - 1]

    def algorithms_of(self, u: int, j: int) -> list[int]:
        return [i for i in range((j - 1) * self.ell + 1, min(j * self.ell, self.k) + 1)]

    def load(self) -> dict[int, int]:
        """Algorithm copies simulated per physical node, summed over skeleton nodes."""
        out: dict[int, int] = defaultdict(int)
        for u in self.helpers:
            for i in range(1, self.k + 1):
                out[self.helper(u, i)] += 1
        return dict(out)


def assign_algorithms(skeleton: SkeletonGraph, helpers: HelperFamily, k: int,
                      g: WeightedGraph | None = None) -> HelperAssignment:
    if k < 1:
        raise ValueError("need at least one algorithm")
    sets = {}
    for u in skeleton.members:
        hs = tuple(sorted(helpers.sets.get(u, ())))
        if not hs:
            raise ValueError(f"skeleton node {u} has an empty helper set")
        sets[u] = hs
    m = min(len(hs) for hs in sets.values()) if sets else 1
    ell = math.ceil(k / m)
    # only the first ceil(k / ell) helpers of each set are used
    used = math.ceil(k / ell)
    radius = {}
    if g is not None:
        for u, hs in sets.items():
            hops = bfs_hops(g, u, helpers.mu)
            for v in hs[:used]:
                radius[(u, v)] = hops[v]
    return HelperAssignment(sets, ell, k, radius)


def pair_helpers(assignment: HelperAssignment, edge: tuple[int, int], i: int) -> tuple[int, int]:
    u, u2 = edge
    return assignment.helper(u, i), assignment.helper(u2, i)


@dataclass
class Distribution:
    views: dict[int, dict[int, dict[int, int]]]  # helper -> skeleton node -> incident skeleton edges
    arrival: dict[tuple[int, int], int]  # (u, helper) -> round the data is complete at helper
    rounds: int


def distribute_inputs(skeleton: SkeletonGraph, assignment: HelperAssignment, engine: HybridEngine | None = None,
                      phase: str = "sched.distribute") -> Distribution:
    """Each skeleton node floods its incident skeleton edges to its helpers.

    Data reaches a helper at hop distance ``r`` after ``r`` local rounds, so
    the phase takes the largest helper radius.
    """
    views: dict[int, dict[int, dict[int, int]]] = defaultdict(dict)
    arrival = {}
    bits: dict[int, int] = {}
    for (u, v), r in sorted(assignment.radius.items()):
        views[v][u] = dict(skeleton.neighbors(u))
        arrival[(u, v)] = r
    rounds = max(arrival.values(), default=0)
    if engine is not None:
        bw = engine.bw
        for u in skeleton.members:
            bits[u] = bw.header_bits + len(skeleton.neighbors(u)) * (bw.id_bits + bw.value_bits)
        engine.charge_local(rounds, phase, bits, note="edges and inputs to helpers")
    return Distribution(dict(views), arrival, rounds)


@dataclass
class ScheduledResult:
    outputs: dict[int, dict[int, Any]]  # algorithm id -> skeleton node -> final state
    simulated_rounds: int
    physical_rounds: int
    local_window: int
    global_rounds: list[int]  # physical global rounds spent per simulated round


def standalone_run(skeleton: SkeletonGraph, alg: SkeletonAlgorithm, config: HybridConfig | None = None) -> dict[int, Any]:
    """Run one algorithm directly on the skeleton; the reference for scheduled runs."""
    config = (config or HybridConfig()).with_seed(alg.seed)
    eng = HybridEngine(skeleton, config, n=skeleton.n)
    return eng.run_until_halt(alg.program, max_rounds=alg.T, phase=alg.name or "standalone").states


def local_window(skeleton: SkeletonGraph, assignment: HelperAssignment, g: WeightedGraph) -> int:
    """Longest helper -> u -> u' -> helper route over all skeleton edges and algorithms."""
    best = 0
    legs = {}
    for u in skeleton.members:
        legs[u] = [assignment.radius.get((u, assignment.helper(u, i)), 0) for i in range(1, assignment.k + 1)]
    for u in skeleton.members:
        near = bfs_hops(g, u, skeleton.h)
        for u2 in skeleton.neighbors(u):
            if u2 < u:
                continue
            mid = near[u2]
            best = max(best, mid + max(a + b for a, b in zip(legs[u], legs[u2])))
    return best


def serialize_global(msgs: Sequence[Message], cap: int) -> list[list[Message]]:
    """First-fit packing into physical rounds under per-node send and receive caps.

    Messages are taken round-robin over the algorithm copies at each sender,
    so no copy waits behind another copy's whole backlog.
    """
    slots: list[list[Message]] = []
    sent: list[dict[int, int]] = []
    recv: list[dict[int, int]] = []
    for m in msgs:
        if m.bits > cap:
            raise ValueError(f"global message of {m.bits} bits cannot fit a cap of {cap} bits")
        r = 0
        while True:
            if r == len(slots):
                slots.append([])
                sent.append(defaultdict(int))
                recv.append(defaultdict(int))
            if sent[r][m.src] + m.bits <= cap and recv[r][m.dst] + m.bits <= cap:
                slots[r].append(m)
                sent[r][m.src] += m.bits
                recv[r][m.dst] += m.bits
                break
            r += 1
    return slots


def run_scheduled(skeleton: SkeletonGraph, assignment: HelperAssignment, algorithms: Sequence[SkeletonAlgorithm],
                  T: int | None = None, engine: HybridEngine | None = None, g: WeightedGraph | None = None,
                  config: HybridConfig | None = None) -> ScheduledResult:
    """Simulate all algorithms in lockstep through their helpers.

    Every copy is stepped with the same inputs, round numbers and seed it
    would see when run alone, so final states match :func:`standalone_run`.
    """
    if len(algorithms) != assignment.k:
        raise ValueError(f"assignment built for k={assignment.k}, got {len(algorithms)} algorithms")
    if engine is None:
        if g is None:
            raise ValueError("need the host graph or an engine")
        engine = HybridEngine(g, config or HybridConfig())
    g = g if g is not None else engine.topology
    config = config or engine.config
    T = T if T is not None else max(a.T for a in algorithms)
    start = engine.round

    distribute_inputs(skeleton, assignment, engine)
    window = local_window(skeleton, assignment, g) if skeleton.edges else 0

    runs: list[tuple[HybridEngine, RunState]] = []
    for alg in algorithms:
        eng = HybridEngine(skeleton, config.with_seed(alg.seed), n=skeleton.n)
        runs.append((eng, eng.start(alg.program, phase=alg.name or "copy")))

    global_rounds: list[int] = []
    t = 0
    while not all(run.quiescent for _, run in runs):
        t += 1
        if t > T:
            raise RoundLimitExceeded(f"a scheduled algorithm is still active after T={T} rounds")
        local_bits: dict[int, int] = defaultdict(int)
        queues: dict[int, list[list[Message]]] = defaultdict(list)
        for idx, (eng, run) in enumerate(runs):
            if run.quiescent:
                continue
            eng.run_round(run)
            i = idx + 1
            mine: dict[int, list[Message]] = defaultdict(list)
            for dst, (loc, glo) in run.inboxes.items():
                for m in loc:
                    local_bits[assignment.helper(m.src, i)] += m.bits
                for m in glo:
                    src = assignment.helper(m.src, i)
                    mine[src].append(Message(src, assignment.helper(dst, i), ("copy", i, m.payload), m.bits, m.seq))
            for src, lst in mine.items():
                queues[src].append(sorted(lst, key=lambda m: m.seq))
        order = []
        for src in sorted(queues):
            # interleave the copies hosted at this helper
            lanes = queues[src]
            for depth in range(max(len(lane) for lane in lanes)):
                order.extend(lane[depth] for lane in lanes if depth < len(lane))
        slots = serialize_global(order, engine.bw.gamma_bits)
        if local_bits:
            engine.charge_local(max(window, 1), "sched.simulate", dict(local_bits), note=f"local legs, round {t}")
        for batch in slots:
            engine.transmit(global_msgs=batch, phase="sched.simulate", note=f"global, round {t}")
        if not local_bits and not slots and not all(run.quiescent for _, run in runs):
            engine.charge(1, "sched.simulate", note=f"silent step, round {t}")
        global_rounds.append(len(slots))

    returned = max(assignment.radius.values(), default=0)
    bw = engine.bw
    back = {v: bw.header_bits + bw.value_bits for (_, v) in assignment.radius}
    engine.charge_local(returned, "sched.return", back, note="outputs back to skeleton nodes")
    outputs = {alg.algo_id: dict(run.states) for alg, (_, run) in zip(algorithms, runs)}
    return ScheduledResult(outputs, t, engine.round - start, window, global_rounds)
