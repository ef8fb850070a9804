#!/usr/bin/env python3
"""Per-instance token loads and rounds for token dissemination over a grid of (k, gamma)."""
import argparse
import math
import random

from hybridssp.engine import HybridConfig, HybridEngine, ceil_log2
from hybridssp.graph import GraphSpec, generate_graph
from hybridssp.kssp import token_dissemination


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--ks", default="16,64,256")
    ap.add_argument("--gammas", default="4,8,16", help="global capacity in tokens per round")
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    probe = HybridConfig().resolve(args.n)
    token_bits = probe.msg_bits(1, 2 * probe.id_bits)
    print("k,gamma_tokens,max_load,load_bound,median_rounds,sqrt_k_over_gamma")
    for k in map(int, args.ks.split(",")):
        for gamma in map(int, args.gammas.split(",")):
            loads, rounds = [], []
            for seed in range(args.seeds):
                g = generate_graph(GraphSpec("random-connected", args.n, seed=seed, p=0.03))
                eng = HybridEngine(g, HybridConfig(gamma=gamma * token_bits, seed=seed))
                holders = random.Random(seed).sample(range(1, args.n + 1), k)
                res = token_dissemination({v: v for v in holders}, eng, token_bits=token_bits, seed=seed)
                loads.append(max(res.loads))
                rounds.append(res.rounds)
            bound = 4 * (k / gamma) * ceil_log2(args.n)
            print(f"{k},{gamma},{max(loads)},{bound:g},{sorted(rounds)[len(rounds) // 2]},{math.sqrt(k / gamma):.2f}")


if __name__ == "__main__":
    main()
