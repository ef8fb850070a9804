#!/usr/bin/env python3
"""Observed stretch of every pipeline against Dijkstra, one line per (pipeline, engine, seed)."""
import argparse
import sys

from hybridssp.harness import ExperimentConfig, run_experiment

RUNS = [
    ("skeleton", "exact", 8),
    ("random", "exact", 16),
    ("arbitrary", "exact", 12),
    ("skeleton", "rounding", 8),
    ("arbitrary", "rounding", 12),
    ("small", "exact", 1),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graph", default="grid")
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--eps", default="0.25")
    ap.add_argument("--source-mode", default="clustered")
    args = ap.parse_args()

    failed = 0
    print(f"{'pipeline':<10} {'engine':<9} {'seed':>4} {'declared':>8} {'min':>7} {'mean':>7} {'max':>7}  rounds")
    for pipeline, engine, k in RUNS:
        d = {"graph": args.graph, "n": str(args.n), "pipeline": pipeline, "engine": engine, "k": str(k),
             "seeds": args.seeds, "source_mode": args.source_mode}
        if engine == "rounding":
            d["eps"] = args.eps
        rep = run_experiment(ExperimentConfig.from_mapping(d), write=False)
        for r in rep.rows:
            failed += not r.passed
            print(f"{pipeline:<10} {engine:<9} {r.seed:>4} {r.declared_stretch:>8.3g} {r.stretch_min:>7.4f} "
                  f"{r.stretch_mean:>7.4f} {r.stretch_max:>7.4f}  {r.total_rounds}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
