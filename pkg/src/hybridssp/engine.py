"""Round-synchronous execution under HYBRID(lambda, gamma) bandwidth rules.

A round is: deliver the messages sent in the previous round, step every
program that is still running or has mail, admit the new outgoing messages
against the local (per edge) and global (per node, send and receive
separately) caps, and record one ledger row.  Row ``r`` of the ledger holds
the traffic sent in round ``r``.

Run-to-quiescence drops the trailing round in which every node only absorbs
its last deliveries and halts without sending: that round carries no
communication, so a flood over a path of diameter ``D`` costs ``D`` rounds.
"""
from __future__ import annotations

import csv
import io
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol

GAMMA_STANDARD = "log2n-squared"
VIOLATION_MODES = ("strict", "adversarial")


def ceil_log2(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


class BandwidthViolation(RuntimeError):
    def __init__(self, kind: str, node: int, round: int, bits: int, cap: int, peer: int | None = None):
        self.kind, self.node, self.round, self.bits, self.cap, self.peer = kind, node, round, bits, cap, peer
        where = f" on edge to {peer}" if peer is not None else ""
        super().__init__(f"{kind} violation at node {node}{where} in round {round}: {bits} bits > cap {cap}")


class RoundLimitExceeded(RuntimeError):
    """Raised when programs are still active after ``max_rounds``."""


@dataclass(frozen=True)
class Bandwidth:
    """Config resolved for a concrete network size."""

    n: int
    log_n: int
    gamma_bits: int
    lam_bits: int | None
    header_bits: int
    value_bits: int

    def msg_bits(self, words: int = 1, extra_bits: int = 0) -> int:
        return self.header_bits + words * self.value_bits + extra_bits

    @property
    def capacity(self) -> int:
        """Single-word global messages per node per round (at least one)."""
        return max(1, self.gamma_bits // self.msg_bits(1))

    @property
    def id_bits(self) -> int:
        return self.log_n


@dataclass(frozen=True)
class HybridConfig:
    lam: int | None = None  # None = unlimited local bandwidth
    gamma: int | str = GAMMA_STANDARD
    header_bits: int | None = None  # default 2*ceil(log n)
    violation_mode: str = "strict"
    max_rounds: int = 1_000_000
    seed: int = 0
    value_width: int = 4  # value fields are value_width*ceil(log n) bits

    def __post_init__(self):
        if self.violation_mode not in VIOLATION_MODES:
            raise ValueError(f"violation_mode must be one of {VIOLATION_MODES}")
        if isinstance(self.gamma, str) and self.gamma != GAMMA_STANDARD:
            raise ValueError(f"gamma must be an integer or {GAMMA_STANDARD!r}")

    def resolve(self, n: int) -> Bandwidth:
        log_n = ceil_log2(n)
        gamma = math.ceil(math.log2(max(n, 2)) ** 2) if self.gamma == GAMMA_STANDARD else int(self.gamma)
        header = self.header_bits if self.header_bits is not None else 2 * log_n
        return Bandwidth(n, log_n, gamma, self.lam, header, self.value_width * log_n)

    def with_seed(self, seed: int) -> "HybridConfig":
        return replace(self, seed=seed)

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any]) -> "HybridConfig":
        kw: dict[str, Any] = {}
        if "lambda" in d:
            lam = str(d["lambda"]).strip()
            kw["lam"] = None if lam in ("unlimited", "inf", "none", "") else int(lam)
        if "gamma" in d:
            g = str(d["gamma"]).strip()
            kw["gamma"] = g if g == GAMMA_STANDARD else int(g)
        for key, conv in (("header_bits", int), ("max_rounds", int), ("seed", int), ("value_width", int)):
            if key in d and str(d[key]).strip() not in ("", "default"):
                kw[key] = conv(d[key])
        if "violation_mode" in d:
            kw["violation_mode"] = str(d["violation_mode"]).strip()
        return cls(**kw)


def read_keyvalue(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` (or ``key: value``) file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        key, _, value = line.partition(sep)
        out[key.strip()] = value.strip()
    return out


@dataclass(slots=True)
class Message:
    src: int
    dst: int
    payload: Any
    bits: int
    seq: int = 0


def adversary_drop(messages: list[Message], cap: int, **_: Any) -> list[Message]:
    """Default policy: keep the smallest ``(src, seq)`` prefix that fits ``cap``."""
    kept, used = [], 0
    for m in sorted(messages, key=lambda m: (m.src, m.seq)):
        if used + m.bits > cap:
            break
        kept.append(m)
        used += m.bits
    return kept


class RandomizedDropPolicy:
    """Seeded shuffle, then keep the longest fitting prefix."""

    def __init__(self, seed: int):
        self.seed = seed

    def __call__(self, messages: list[Message], cap: int, *, round: int = 0, node: int = 0) -> list[Message]:
        order = sorted(messages, key=lambda m: (m.src, m.seq))
        random.Random(f"{self.seed}/{round}/{node}").shuffle(order)
        kept, used = [], 0
        for m in order:
            if used + m.bits > cap:
                break
            kept.append(m)
            used += m.bits
        return kept


@dataclass
class RoundRecord:
    round: int
    phase: str
    global_sent: dict[int, int] = field(default_factory=dict)
    global_recv: dict[int, int] = field(default_factory=dict)
    local_bits: dict[int, int] = field(default_factory=dict)
    charged: bool = False
    note: str = ""


class RoundLedger:
    """Per-round bandwidth tally; the round-complexity evidence of a run."""

    def __init__(self):
        self.records: list[RoundRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: RoundRecord) -> None:
        self.records.append(rec)

    def rounds(self, phase: str | None = None) -> int:
        if phase is None:
            return len(self.records)
        return sum(1 for r in self.records if r.phase == phase or r.phase.startswith(phase + "."))

    def phase_rounds(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.phase] = out.get(r.phase, 0) + 1
        return out

    def max_global_sent(self) -> int:
        return max((max(r.global_sent.values(), default=0) for r in self.records), default=0)

    def max_global_recv(self) -> int:
        return max((max(r.global_recv.values(), default=0) for r in self.records), default=0)

    def total_global_bits(self) -> tuple[int, int]:
        sent = sum(sum(r.global_sent.values()) for r in self.records)
        recv = sum(sum(r.global_recv.values()) for r in self.records)
        return sent, recv

    def total_local_bits(self) -> int:
        return sum(sum(r.local_bits.values()) for r in self.records)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "phase", "node", "global_sent_bits", "global_recv_bits", "local_bits"])
        for r in self.records:
            nodes = sorted(set(r.global_sent) | set(r.global_recv) | set(r.local_bits))
            if not nodes:
                w.writerow([r.round, r.phase, "", 0, 0, 0])
            for v in nodes:
                w.writerow([r.round, r.phase, v, r.global_sent.get(v, 0), r.global_recv.get(v, 0), r.local_bits.get(v, 0)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


class RoundContext:
    """What a program sees and can do during one round at one node."""

    __slots__ = ("node", "round", "neighbors", "local_inbox", "global_inbox", "bw", "_seed", "_rng", "_out_local", "_out_global", "_seq")

    def __init__(self, node, round, neighbors, local_inbox, global_inbox, bw, seed):
        self.node = node
        self.round = round
        self.neighbors = neighbors
        self.local_inbox = local_inbox
        self.global_inbox = global_inbox
        self.bw = bw
        self._seed = seed
        self._rng = None
        self._out_local: list[Message] = []
        self._out_global: list[Message] = []
        self._seq = 0

    @property
    def rng(self) -> random.Random:
        # per (seed, node, round) stream; nodes cannot observe each other's draws
        if self._rng is None:
            self._rng = random.Random(f"{self._seed}/{self.node}/{self.round}")
        return self._rng

    def send_local(self, dst: int, payload: Any, bits: int | None = None) -> None:
        if dst not in self.neighbors:
            raise ValueError(f"node {self.node} has no local edge to {dst}")
        self._out_local.append(Message(self.node, dst, payload, bits if bits is not None else self.bw.msg_bits(), self._seq))
        self._seq += 1

    def send_global(self, dst: int, payload: Any, bits: int | None = None) -> None:
        self._out_global.append(Message(self.node, dst, payload, bits if bits is not None else self.bw.msg_bits(), self._seq))
        self._seq += 1


class NodeProgram(Protocol):
    def init(self, node: int) -> Any: ...

    def step(self, state: Any, ctx: RoundContext) -> tuple[Any, bool]: ...


class Topology(Protocol):
    @property
    def nodes(self) -> Iterable[int]: ...

    def neighbors(self, v: int) -> Mapping[int, int]: ...


@dataclass
class RunState:
    """Engine state of one program execution."""

    programs: dict[int, NodeProgram]
    states: dict[int, Any]
    halted: dict[int, bool]
    inboxes: dict[int, tuple[list[Message], list[Message]]]
    phase: str
    rounds: int = 0

    @property
    def quiescent(self) -> bool:
        return not self.inboxes and all(self.halted.values())


@dataclass
class RunResult:
    states: dict[int, Any]
    rounds: int
    ledger: RoundLedger


class HybridEngine:
    """Barrier-synchronous HYBRID network over ``topology``.

    ``n`` fixes ``log n`` for bandwidth resolution; it defaults to the number
    of topology nodes but a sub-network (e.g. a skeleton) passes the host size.
    """

    def __init__(self, topology: Topology, config: HybridConfig | None = None, *, n: int | None = None,
                 policy: Callable[..., list[Message]] = adversary_drop):
        self.topology = topology
        self.config = config or HybridConfig()
        self.nodes = sorted(topology.nodes)
        self.n = n if n is not None else len(self.nodes)
        self.bw = self.config.resolve(self.n)
        self.policy = policy
        self.ledger = RoundLedger()
        self.round = 0

    # -- program execution -------------------------------------------------
    def start(self, programs: NodeProgram | Mapping[int, NodeProgram], phase: str = "main",
              nodes: Iterable[int] | None = None) -> RunState:
        nodes = sorted(nodes) if nodes is not None else self.nodes
        if isinstance(programs, Mapping):
            progs = {v: programs[v] for v in nodes}
        else:
            progs = {v: programs for v in nodes}
        states = {v: progs[v].init(v) for v in nodes}
        return RunState(progs, states, {v: False for v in nodes}, {}, phase)

    def run_round(self, run: RunState) -> RunState:
        r = self.round + 1
        out_local: list[Message] = []
        out_global: list[Message] = []
        inboxes = run.inboxes
        empty: list[Message] = []
        for v in run.programs:
            mail = inboxes.get(v)
            if run.halted[v] and mail is None:
                continue
            ctx = RoundContext(v, r, self.topology.neighbors(v), mail[0] if mail else empty,
                               mail[1] if mail else empty, self.bw, self.config.seed)
            run.states[v], run.halted[v] = run.programs[v].step(run.states[v], ctx)
            out_local.extend(ctx._out_local)
            out_global.extend(ctx._out_global)
        delivered_global, delivered_local = self._admit(out_global, out_local, r, run.phase)
        new_inboxes: dict[int, tuple[list[Message], list[Message]]] = {}
        for m in delivered_local:
            if m.dst in run.halted:
                new_inboxes.setdefault(m.dst, ([], []))[0].append(m)
        for m in delivered_global:
            if m.dst in run.halted:
                new_inboxes.setdefault(m.dst, ([], []))[1].append(m)
        run.inboxes = new_inboxes
        run.rounds += 1
        self.round = r
        return run

    def run_until_halt(self, programs: NodeProgram | Mapping[int, NodeProgram], max_rounds: int | None = None,
                       phase: str = "main", nodes: Iterable[int] | None = None) -> RunResult:
        if max_rounds is None:
            max_rounds = self.config.max_rounds
        if max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        run = self.start(programs, phase, nodes)
        while True:
            self.run_round(run)
            if run.quiescent:
                last = self.ledger.records[-1]
                silent = not (last.global_sent or last.local_bits)
                if silent and run.rounds > 1:
                    self.ledger.records.pop()
                    self.round -= 1
                    run.rounds -= 1
                break
            if run.rounds >= max_rounds:
                raise RoundLimitExceeded(f"phase {phase!r} still active after {max_rounds} rounds")
        return RunResult(run.states, run.rounds, self.ledger)

    # -- driver-issued traffic ---------------------------------------------
    def transmit(self, global_msgs: Iterable[Message] = (), local_msgs: Iterable[Message] = (),
                 phase: str = "main", note: str = "") -> list[Message]:
        """One round of traffic issued by a driver rather than by programs."""
        r = self.round + 1
        delivered, _ = self._admit(list(global_msgs), list(local_msgs), r, phase, note)
        self.round = r
        return delivered

    def charge(self, rounds: int, phase: str, note: str = "") -> None:
        """Account ``rounds`` rounds of a construction whose internals are not simulated."""
        for _ in range(max(0, rounds)):
            self.round += 1
            self.ledger.append(RoundRecord(self.round, phase, charged=True, note=note))

    def charge_local(self, rounds: int, phase: str, local_bits: Mapping[int, int], note: str = "") -> None:
        """Charged local-only rounds; ``local_bits`` is booked on the first one."""
        if rounds <= 0:
            return
        self.round += 1
        self.ledger.append(RoundRecord(self.round, phase, local_bits={v: b for v, b in local_bits.items() if b},
                                       charged=True, note=note))
        self.charge(rounds - 1, phase, note)

    # -- admission ----------------------------------------------------------
    def _admit(self, out_global: list[Message], out_local: list[Message], r: int, phase: str,
               note: str = "") -> tuple[list[Message], list[Message]]:
        strict = self.config.violation_mode == "strict"
        bw = self.bw
        local_bits: dict[int, int] = defaultdict(int)
        if bw.lam_bits is not None and out_local:
            per_edge: dict[tuple[int, int], list[Message]] = defaultdict(list)
            for m in out_local:
                per_edge[(m.src, m.dst)].append(m)
            kept_local = []
            for (u, v), msgs in sorted(per_edge.items()):
                total = sum(m.bits for m in msgs)
                if total > bw.lam_bits:
                    if strict:
                        raise BandwidthViolation("local", u, r, total, bw.lam_bits, peer=v)
                    msgs = self.policy(msgs, bw.lam_bits, round=r, node=u)
                kept_local.extend(msgs)
            out_local = kept_local
        for m in out_local:
            local_bits[m.src] += m.bits

        sent: dict[int, int] = defaultdict(int)
        by_src: dict[int, list[Message]] = defaultdict(list)
        for m in out_global:
            by_src[m.src].append(m)
            sent[m.src] += m.bits
        cap = bw.gamma_bits
        kept: list[Message] = []
        for src in sorted(by_src):
            msgs = by_src[src]
            if sent[src] > cap:
                if strict:
                    raise BandwidthViolation("global-send", src, r, sent[src], cap)
                msgs = self.policy(msgs, cap, round=r, node=src)
            kept.extend(msgs)
        by_dst: dict[int, list[Message]] = defaultdict(list)
        for m in kept:
            by_dst[m.dst].append(m)
        delivered: list[Message] = []
        sent_ok: dict[int, int] = defaultdict(int)
        recv_ok: dict[int, int] = {}
        for dst in sorted(by_dst):
            msgs = by_dst[dst]
            total = sum(m.bits for m in msgs)
            if total > cap:
                if strict:
                    raise BandwidthViolation("global-recv", dst, r, total, cap)
                msgs = self.policy(msgs, cap, round=r, node=dst)
                total = sum(m.bits for m in msgs)
            recv_ok[dst] = total
            for m in msgs:
                sent_ok[m.src] += m.bits
            delivered.extend(msgs)
        self.ledger.append(RoundRecord(r, phase, dict(sent_ok), recv_ok, dict(local_bits), note=note))
        return delivered, out_local
