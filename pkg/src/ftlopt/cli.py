"""Command-line interface.

Commands: transform, solve, compare, oracle, emit-lp.  Exit codes:
0 success, 2 input error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import engine, instances, oracle, scenarios
from .model import PartitionViolation, fmt_money


def _load_config(args) -> engine.AlnsConfig:
    cfg = engine.load_config(args.config) if args.config else engine.AlnsConfig()
    if getattr(args, "seed", None) is not None:
        cfg = engine.with_seed(cfg, args.seed)
    cfg.check()
    return cfg


def cmd_transform(args) -> int:
    with open(args.gh, "r", encoding="utf-8") as fh:
        gh = instances.parse_gh(fh.read())
    cfg = instances.TransformConfig(factor=args.factor)
    instance = instances.transform(gh, cfg)
    instances.write_instance(instance, args.out)
    print(f"{instance.name or 'instance'}: {len(instance.requests)} requests, "
          f"mu {instance.mu_d10 / 10:.0f} km, horizon {instance.horizon.days} days -> {args.out}")
    return 0


def cmd_solve(args) -> int:
    instance = instances.read_instance(args.instance)
    cfg = _load_config(args)
    if args.scenario == "all-sm":
        result, solution = scenarios.scenario_all_sm(instance)
        report = None
    elif args.scenario == "all-fct":
        result, solution, report = scenarios.scenario_all_fct(instance, cfg)
    else:
        result, solution, report = scenarios.scenario_mixed(instance, cfg)
    doc = scenarios.solution_to_dict(instance, solution)
    doc["scenario"] = result.scenario
    doc["kpis"] = result.csv_row()
    if result.residual:
        doc["residual"] = result.residual
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if report is not None:
        engine.write_report(report, args.out + ".report.json", args.out + ".trace.csv")
    if args.dump_schedule:
        sys.stdout.write(scenarios.dump_schedules(instance, solution))
    print(f"{result.scenario}: total {fmt_money(result.total_cents)} EUR, "
          f"{result.vehicles} vehicles, {len(solution.bank)} outsourced -> {args.out}")
    return 0


def cmd_compare(args) -> int:
    instance = instances.read_instance(args.instance)
    cfg = _load_config(args)
    rows = scenarios.compare(instance, cfg, args.out_dir)
    for row in rows:
        print(row.csv_row())
    return 0


def cmd_oracle(args) -> int:
    instance = instances.read_instance(args.instance)
    best = oracle.brute_force(instance)
    print(f"optimal total {fmt_money(best.cost_total)} EUR")
    for t in best.trips:
        print(f"  trip {list(t.requests)}: {t.total_d10 / 10:.1f} km")
    print(f"  outsourced: {sorted(best.bank)}")
    return 0


def cmd_emit_lp(args) -> int:
    instance = instances.read_instance(args.instance)
    graph = oracle.build_arc_graph(instance)
    oracle.emit_lp(graph, instance, args.out)
    print(f"{len(graph.arcs)} arcs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftlopt", description="Full-truck-load fleet vs. spot-market planning"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="turn a benchmark file into a native instance")
    p.add_argument("--gh", required=True, help="benchmark file in the whitespace-column layout")
    p.add_argument("--factor", type=int, default=6, help="distance/time stretch factor")
    p.add_argument("--out", required=True, help="native instance JSON to write")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("solve", help="solve one scenario")
    p.add_argument("--instance", required=True)
    p.add_argument("--scenario", choices=("all-sm", "all-fct", "mixed"), required=True)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", required=True, help="solution JSON to write")
    p.add_argument("--dump-schedule", action="store_true", help="print trip schedules as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run all three scenarios and write reports")
    p.add_argument("--instance", required=True)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exact optimum by enumeration (micro instances)")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("emit-lp", help="write the routing/min-distance model as an LP file")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_lp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except engine.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (
        instances.ParseError,
        instances.SchemaError,
        instances.TransformError,
        oracle.TooLarge,
        PartitionViolation,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
