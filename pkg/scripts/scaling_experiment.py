#!/usr/bin/env python3
"""Median scheduled-phase rounds for growing k, plus the doubled-gamma comparison.

    python scripts/scaling_experiment.py --n 1024 --ks 16,64,256 --seeds 1,2,3 --out scaling.csv
"""
import argparse
import sys

from hybridssp.harness import ExperimentConfig, emit_scaling_table, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graph", default="random-geometric")
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--ks", default="16,64,256")
    ap.add_argument("--seeds", default="1,2,3")
    ap.add_argument("--pipeline", default="arbitrary")
    ap.add_argument("--out", default="scaling.csv")
    ap.add_argument("--gamma-k", type=int, default=64, help="k used for the doubled-gamma comparison (0 to skip)")
    args = ap.parse_args()

    ks = [int(t) for t in args.ks.split(",")]
    base = {"graph": args.graph, "n": str(args.n), "pipeline": args.pipeline, "k": str(ks[0]), "seeds": args.seeds}
    text, rows = emit_scaling_table(ExperimentConfig.from_mapping(base), ks, args.out)
    sys.stdout.write(text)

    if args.gamma_k:
        cfg = ExperimentConfig.from_mapping(dict(base, k=str(args.gamma_k)))
        gamma = cfg.hybrid.resolve(args.n).gamma_bits
        for g in (gamma, 2 * gamma):
            rep = run_experiment(ExperimentConfig.from_mapping(dict(base, k=str(args.gamma_k), gamma=str(g))), write=False)
            print(f"k={args.gamma_k} gamma={g} bits: scheduled rounds per seed {[r.scheduled_rounds for r in rep.rows]}")
    return 0 if all(r["passed"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
