"""Acceptance criteria 1-10.  Each test prints one ``criterion N: PASS|FAIL`` line."""
import math
import random
import statistics
import time

import pytest

from hybridssp.engine import HybridConfig, HybridEngine, ceil_log2
from hybridssp.euler import euler_orient, extend_cluster, network_decomposition, power_graph, random_eulerian_instance
from hybridssp.graph import GraphSpec, generate_graph
from hybridssp.harness import ExperimentConfig, choose_sources, run_experiment, skeleton_fidelity
from hybridssp.kssp import (BellmanFordProgram, kssp_arbitrary_sources, kssp_random_sources, kssp_skeleton_sources,
                            kssp_small, token_dissemination)
from hybridssp.scheduler import SkeletonAlgorithm, assign_algorithms, run_scheduled, standalone_run
from hybridssp.skeleton import (SkeletonParams, build_skeleton, compute_helper_sets, sample_skeleton,
                                verify_helper_family)
from test_scheduler import Gossip


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def euler_hosts():
    """50 seeded host graphs with n cycling through 32, 64, 128."""
    for seed in range(50):
        n = (32, 64, 128)[seed % 3]
        yield seed, n, generate_graph(GraphSpec("random-connected", n, seed=seed, p=0.15))


# ------------------------------------------------------------------------------------


def test_criterion_1_euler_orientation(verdict):
    t0 = time.perf_counter()
    bad = []
    for seed, n, g in euler_hosts():
        virt = random.Random(seed).randint(0, ceil_log2(n) ** 2)
        inst = random_eulerian_instance(g, seed, num_virtual=virt)
        o = euler_orient(inst, seed=seed).orientation
        deg = inst.degrees()
        ins, outs = o.degrees()
        for v, d in deg.items():
            if not (ins.get(v, 0) == outs.get(v, 0) == d // 2):
                bad.append((seed, v))
        if not o.complete:
            bad.append((seed, "incomplete"))
    elapsed = time.perf_counter() - t0
    verdict(1, not bad and elapsed < 10, f"50 instances, {len(bad)} unbalanced nodes, {elapsed:.2f}s (< 10s)")


def test_criterion_2_network_decomposition(verdict):
    worst = {"colors": 0, "diameter": 0}
    failures = []
    for seed, n, g in euler_hosts():
        adj = power_graph(g)
        dec = network_decomposition(adj, seed=seed)
        bound = 8 * ceil_log2(n)
        worst["colors"] = max(worst["colors"], dec.colors / ceil_log2(n))
        worst["diameter"] = max(worst["diameter"], dec.max_diameter / ceil_log2(n))
        if any(dec.cluster_of[u] != dec.cluster_of[v] and dec.color(u) == dec.color(v) for u in adj for v in adj[u]):
            failures.append((seed, "coloring"))
        if dec.colors > bound or dec.max_diameter > bound:
            failures.append((seed, "bounds"))
        for c in set(dec.color_of_cluster.values()):
            seen: set[int] = set()
            for cid in dec.clusters_of_color(c):
                ext = extend_cluster(dec, cid, g)
                if seen & ext:
                    failures.append((seed, "overlap"))
                seen |= ext
    verdict(2, not failures, f"50 decompositions, max colors/log n {worst['colors']:.2f}, "
                             f"max diameter/log n {worst['diameter']:.2f} (bound 8), failures {failures[:3]}")


def test_criterion_3_skeleton_fidelity(verdict):
    problems = []
    for kind in ("grid", "random-connected"):
        for seed in range(20):
            g = generate_graph(GraphSpec(kind, 256, seed=seed, p=0.03))
            h = 4 * 4 * math.ceil(math.log(256))
            sk = build_skeleton(g, sample_skeleton(g, 0.25, seed), h, p=0.25, x=4)
            problems += [f"{kind}/{seed}: {p}" for p in skeleton_fidelity(g, sk)]
    verdict(3, not problems, f"40 skeletons, {len(problems)} distance mismatches {problems[:2]}")


def test_criterion_4_helper_sets(verdict):
    problems = []
    overlap = 0
    for seed in range(20):
        kind = ("grid", "random-connected")[seed % 2]
        g = generate_graph(GraphSpec(kind, 256, seed=seed, p=0.03))
        fam = compute_helper_sets(g, sample_skeleton(g, 0.25, seed), 4)
        overlap = max(overlap, fam.max_overlap)
        problems += verify_helper_family(g, fam)
        if fam.capacity != 8 * ceil_log2(256):
            problems.append("capacity")
    verdict(4, not problems, f"20 families, max overlap {overlap} <= {8 * ceil_log2(256)}, problems {problems[:2]}")


def test_criterion_5_scheduling_equivalence(verdict):
    mismatches = 0
    runs = 0
    for seed in range(4):
        g = generate_graph(GraphSpec("grid", 144, seed=seed))
        eng = HybridEngine(g, HybridConfig(seed=seed))
        params = SkeletonParams.from_x(g.n, 4)
        sk = build_skeleton(g, sample_skeleton(g, params.p, seed), params.h, eng, p=params.p, x=params.x)
        fam = compute_helper_sets(g, sk.members, sk.x, eng)
        for k in (4, 8, 16):
            asg = assign_algorithms(sk, fam, k, g)
            same = [SkeletonAlgorithm(i, BellmanFordProgram(sk.members[0]), 400, seed=seed) for i in range(1, k + 1)]
            mixed = [SkeletonAlgorithm(i, BellmanFordProgram(sk.members[i % len(sk.members)]), 400, seed=i)
                     if i % 2 else SkeletonAlgorithm(i, Gossip(sk.members), 400, seed=seed * 100 + i)
                     for i in range(1, k + 1)]
            for algs in (same, mixed):
                res = run_scheduled(sk, asg, algs, engine=HybridEngine(g, HybridConfig(seed=seed)), g=g)
                for a in algs:
                    runs += 1
                    mismatches += res.outputs[a.algo_id] != standalone_run(sk, a)
    verdict(5, mismatches == 0, f"{runs} scheduled copies over k in (4, 8, 16), {mismatches} state mismatches")


BANDWIDTH: list[tuple[str, int, int, int]] = []  # (run, max sent, max recv, gamma) shared with criterion 7


def record(name, res):
    led = res.ledger
    BANDWIDTH.append((name, led.max_global_sent(), led.max_global_recv(), res.engine.bw.gamma_bits))
    return res


def observed(g, table):
    stats = table.stretch_stats(g)
    return stats["below_exact"], stats["min"], stats["max"]


def test_criterion_6_stretch(verdict):
    lines = []
    ok = True
    grid = lambda s: generate_graph(GraphSpec("grid", 256, seed=s))

    worst = 0.0
    for seed in range(5):
        g = grid(seed)
        eng = HybridEngine(g, HybridConfig(seed=seed))
        params = SkeletonParams.for_sources(g.n, 8, eng.bw.capacity)
        sk = build_skeleton(g, sample_skeleton(g, params.p, seed), params.h, eng, p=params.p, x=params.x)
        src = random.Random(seed).sample(sk.members, 8)
        res = record(f"skeleton/{seed}", kssp_skeleton_sources(g, sk, src, engine=eng, seed=seed))
        below, lo, hi = observed(g, res.table)
        ok &= below == 0 and hi == 1.0
        worst = max(worst, hi)
    lines.append(f"skeleton exact max {worst}")

    worst = 0.0
    for seed in range(5):
        g = generate_graph(GraphSpec("random-connected", 256, seed=seed, p=0.03))
        res = record(f"random/{seed}", kssp_random_sources(g, 16, seed=seed))
        below, lo, hi = observed(g, res.table)
        ok &= below == 0 and hi == 1.0 and not res.info["delegated"]
        worst = max(worst, hi)
    lines.append(f"random exact max {worst}")

    cfg = ExperimentConfig.from_mapping({"graph": "grid", "n": "256", "pipeline": "arbitrary", "k": "12",
                                         "source_mode": "clustered", "seeds": ",".join(map(str, range(10)))})
    rep = run_experiment(cfg, write=False)
    hi = max(r.stretch_max for r in rep.rows)
    lo = min(r.stretch_min for r in rep.rows)
    ok &= lo >= 1.0 and hi <= 3.0 and all(r.below_exact == 0 for r in rep.rows)
    BANDWIDTH.extend((f"arbitrary/{r.seed}", r.max_global_sent, r.max_global_recv, r.gamma_bits) for r in rep.rows)
    lines.append(f"arbitrary exact range [{lo:.3f}, {hi:.3f}]")

    sk_hi = arb_hi = 0.0
    for seed in range(5):
        g = grid(seed)
        eng = HybridEngine(g, HybridConfig(seed=seed))
        params = SkeletonParams.for_sources(g.n, 8, eng.bw.capacity)
        sk = build_skeleton(g, sample_skeleton(g, params.p, seed), params.h, eng, p=params.p, x=params.x)
        src = random.Random(seed).sample(sk.members, 8)
        res = record(f"skeleton-rounding/{seed}",
                     kssp_skeleton_sources(g, sk, src, 0.25, "rounding", engine=eng, seed=seed))
        below, _, hi = observed(g, res.table)
        ok &= below == 0 and hi <= 1.25
        sk_hi = max(sk_hi, hi)
        res = record(f"arbitrary-rounding/{seed}",
                     kssp_arbitrary_sources(g, choose_sources(g, 12, "clustered", seed), 0.25, "rounding", seed=seed))
        below, _, hi = observed(g, res.table)
        ok &= below == 0 and hi <= 3.75
        arb_hi = max(arb_hi, hi)
    lines.append(f"rounding eps=0.25 skeleton max {sk_hi:.4f} (<= 1.25), arbitrary max {arb_hi:.4f} (<= 3.75)")
    verdict(6, ok, "; ".join(lines))


def test_criterion_7_bandwidth(verdict):
    g = generate_graph(GraphSpec("grid", 256, seed=7))
    record("small/7", kssp_small(g, [3], seed=7))
    record("random/7", kssp_random_sources(g, 16, seed=7))
    record("arbitrary/7", kssp_arbitrary_sources(g, list(range(1, 13)), seed=7))
    gamma = HybridConfig().resolve(256).gamma_bits
    worst_sent = max(b[1] for b in BANDWIDTH)
    worst_recv = max(b[2] for b in BANDWIDTH)
    ok = all(s <= gm and r <= gm and gm == gamma for _, s, r, gm in BANDWIDTH)
    verdict(7, ok, f"{len(BANDWIDTH)} strict-mode runs at gamma={gamma} bits, max global sent {worst_sent}, "
                   f"max global received {worst_recv}")


@pytest.mark.slow
def test_criterion_8_round_scaling(verdict):
    seeds = "1,2,3"
    medians = {}
    elapsed = {}
    for k in (16, 64, 256):
        t0 = time.perf_counter()
        cfg = ExperimentConfig.from_mapping({"graph": "random-geometric", "n": "1024", "pipeline": "arbitrary",
                                             "k": str(k), "seeds": seeds})
        rep = run_experiment(cfg, write=False)
        assert rep.passed
        medians[k] = statistics.median(r.scheduled_rounds for r in rep.rows)
        elapsed[k] = time.perf_counter() - t0
    ratios = [medians[64] / medians[16], medians[256] / medians[64]]
    base = HybridConfig().resolve(1024).gamma_bits
    doubled = {}
    for gamma in (base, 2 * base):
        cfg = ExperimentConfig.from_mapping({"graph": "random-geometric", "n": "1024", "pipeline": "arbitrary",
                                             "k": "64", "seeds": seeds, "gamma": str(gamma)})
        doubled[gamma] = [r.scheduled_rounds for r in run_experiment(cfg, write=False).rows]
    no_increase = all(b <= a for a, b in zip(doubled[base], doubled[2 * base]))
    ok = all(1.4 <= r <= 3.0 for r in ratios) and no_increase and max(elapsed.values()) < 300
    verdict(8, ok, f"median scheduled rounds {medians}, ratios {ratios[0]:.2f} and {ratios[1]:.2f} (in [1.4, 3.0]); "
                   f"k=64 rounds at gamma {base} vs {2 * base}: {doubled[base]} vs {doubled[2 * base]}; "
                   f"slowest configuration {max(elapsed.values()):.0f}s")


def test_criterion_9_token_dissemination(verdict):
    worst = []
    ok = True
    n = 256
    probe = HybridConfig().resolve(n)
    token_bits = probe.msg_bits(1, 2 * probe.id_bits)
    for k in (16, 64):
        for gamma in (8, 16):
            bound = 4 * (k / gamma) * ceil_log2(n)
            peak = 0
            for seed in range(10):
                g = generate_graph(GraphSpec("random-connected", n, seed=seed, p=0.03))
                eng = HybridEngine(g, HybridConfig(gamma=gamma * token_bits, seed=seed))
                holders = random.Random(f"holders/{seed}").sample(range(1, n + 1), k)
                res = token_dissemination({v: v for v in holders}, eng, token_bits=token_bits, seed=seed)
                ok &= all(len(res.known[v]) == k for v in g.nodes) and max(res.loads) <= bound
                peak = max(peak, max(res.loads))
            worst.append(f"k={k} gamma={gamma}: max load {peak} <= {bound:g}")
    verdict(9, ok, "; ".join(worst))


def test_criterion_10_determinism(verdict):
    configs = [
        {"graph": "grid", "n": "256", "pipeline": "arbitrary", "k": "12", "source_mode": "clustered", "seeds": "3"},
        {"graph": "random-connected", "n": "256", "p": "0.03", "pipeline": "random", "k": "16", "seeds": "4"},
        {"graph": "grid", "n": "256", "pipeline": "skeleton", "k": "8", "seeds": "5", "engine": "rounding",
         "eps": "0.25"},
        {"graph": "path", "n": "8", "pipeline": "small", "k": "1", "seeds": "6"},
    ]
    same = []
    for d in configs:
        a = run_experiment(ExperimentConfig.from_mapping(d), write=False).to_json()
        b = run_experiment(ExperimentConfig.from_mapping(d), write=False).to_json()
        same.append(a.encode() == b.encode())
    verdict(10, all(same), f"{sum(same)}/{len(same)} configurations byte-identical on rerun")
