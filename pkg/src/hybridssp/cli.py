"""Command line: ``hybridssp {generate,run,verify,scale}``.

Every experiment key can be given in a flat ``key = value`` file
(``--config``) and overridden by a flag of the same name.
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .graph import GRAPH_KINDS, GraphSpec, generate_graph, save_edgelist
from .harness import CHECKS, ConfigError, ExperimentConfig, emit_scaling_table, run_checks, run_experiment
from .kssp import PipelineError

CONFIG_KEYS = ("graph", "n", "weights", "p", "radius", "rows", "graph_seed", "lambda", "gamma", "violation_mode",
               "header_bits", "max_rounds", "value_width", "pipeline", "k", "eps", "engine", "seeds", "source_mode",
               "report", "table", "ledger")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value experiment file")
    for key in CONFIG_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar=key.upper())


def _config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {k: str(getattr(args, k)) for k in CONFIG_KEYS if getattr(args, k, None) is not None}
    if args.config:
        return ExperimentConfig.load(args.config, overrides)
    return ExperimentConfig.from_mapping(overrides)


def cmd_generate(args: argparse.Namespace) -> int:
    weights = tuple(int(t) for t in args.weights.split(",")) if args.weights else None
    spec = GraphSpec(args.kind, args.n, weight_range=weights, seed=args.seed, p=args.p, radius=args.radius, rows=args.rows)
    g = generate_graph(spec)
    if args.out:
        save_edgelist(g, args.out)
    else:
        sys.stdout.write(g.to_edgelist())
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    report = run_experiment(cfg)
    if not cfg.report:
        sys.stdout.write(report.to_json())
    for row in report.rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"{status} seed={row.seed} stretch<={row.declared_stretch:g} observed max {row.stretch_max:.4f} "
              f"rounds={row.total_rounds} scheduled={row.scheduled_rounds}", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config(args)
    names = args.check or ["all"]
    if "all" in names:
        names = sorted(CHECKS) + ["stretch", "bandwidth", "determinism"]
    results = run_checks(cfg, names)
    failed = 0
    for name, seed, ok, detail in results:
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name} seed={seed}: {detail}")
    return 1 if failed else 0


def cmd_scale(args: argparse.Namespace) -> int:
    cfg = _config(args)
    ks = [int(t) for t in args.ks.split(",")]
    text, rows = emit_scaling_table(cfg, ks, args.out)
    sys.stdout.write(text)
    return 0 if all(r["passed"] for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridssp", description="k-source shortest paths in a simulated hybrid network")
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("generate", help="write a generated graph as an edge list")
    gen.add_argument("--kind", choices=GRAPH_KINDS, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--weights", help="lo,hi (default 1,n^2)")
    gen.add_argument("--p", type=float, default=0.1)
    gen.add_argument("--radius", type=float)
    gen.add_argument("--rows", type=int)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run a pipeline and write the report")
    _add_config_flags(run)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run named invariant checks")
    _add_config_flags(ver)
    ver.add_argument("--check", action="append",
                     help=f"one of {sorted(CHECKS) + ['stretch', 'bandwidth', 'determinism', 'all']}; repeatable")
    ver.set_defaults(func=cmd_verify)

    sc = sub.add_parser("scale", help="median rounds for several k")
    _add_config_flags(sc)
    sc.add_argument("--ks", required=True, help="comma list, e.g. 16,64,256")
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_scale)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
