"""Command line entry point: ``detplace <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from detplace.errors import DetplaceError
from detplace.model import (
    Method,
    SolverConfig,
    dump_pool,
    dump_topology,
    load_plan,
    load_pool,
    load_topology,
)

SOLVER_CHOICES = [m.value for m in Method]


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def d(value):
        return argparse.SUPPRESS if suppress else value

    g = parser.add_argument_group("solver options")
    g.add_argument("--seed", type=int, default=d(0), help="RNG seed (default 0)")
    g.add_argument("--solver", choices=SOLVER_CHOICES, default=d("tabu"), help="selection backend (default tabu)")
    g.add_argument("--max-iters", type=int, default=d(10), help="iteration limit (default 10)")
    g.add_argument("--patience", type=int, default=d(2), help="non-improving iterations tolerated (default 2)")
    g.add_argument("--time-resolution-ms", type=float, default=d(1.0), help="scheduling slot width (default 1 ms)")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))


def _solver(args) -> SolverConfig:
    return SolverConfig(
        method=Method(args.solver),
        max_iterations=args.max_iters,
        patience=args.patience,
        seed=args.seed,
        time_resolution_ms=args.time_resolution_ms,
    )


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def cmd_generate(args) -> int:
    from detplace.topogen import GeneratorConfig, generate_pool, generate_topology

    cfg = GeneratorConfig(alpha=args.alpha, x_max=args.x_max, seed=args.seed, n_data_types=args.n_data_types)
    topo = generate_topology(cfg)
    pool = generate_pool(args.n_ids, cfg)
    dump_topology(topo, args.out_topology)
    dump_pool(pool, args.out_pool)
    print(f"{len(topo.layers)} layers, {len(topo.node_ids)} nodes, {len(pool)} detectors")
    return 0


def cmd_optimize(args) -> int:
    from detplace.system import optimize_system, report_to_dict

    report = optimize_system(load_topology(args.topology), load_pool(args.pool), _solver(args))
    _emit(report_to_dict(report), args.out)
    return 0


def cmd_validate(args) -> int:
    from detplace.model import validate_plan

    plan_path = Path(args.plan)
    raw = json.loads(plan_path.read_text(encoding="utf-8"))
    # accept either a bare plan or an optimize report wrapping one
    if "plan" in raw:
        from detplace.model import plan_from_dict

        plan = plan_from_dict(raw["plan"])
    else:
        plan = load_plan(plan_path)
    violations = validate_plan(plan, load_topology(args.topology), load_pool(args.pool))
    for v in violations:
        print(f"{v.node_id}\t{v.rule.value}\t{v.detail}")
    if not violations:
        print("plan is valid")
    return 1 if violations else 0


def cmd_bench(args) -> int:
    from detplace.bench import BenchConfig, run_benchmark, summarize, write_csv

    cfg = BenchConfig(
        n_architectures=args.n_architectures,
        ids_counts=_int_list(args.ids_counts),
        node_sweep=_int_list(args.node_sweep) if args.node_sweep else (),
        repeats=args.repeats,
        backends=tuple(Method(b) for b in args.backends.split(",")),
        seed=args.seed,
        output=Path(args.output) if args.output else None,
        solver=_solver(args),
    )
    rows = run_benchmark(cfg, progress=args.verbose)
    if cfg.output is None:
        write_csv(rows, sys.stdout)
    else:
        for backend, s in summarize(rows).items():
            print(f"{backend:>6}  metric {s['mean_metric']:.4f}  wall {s['mean_wall_time_ms']:.1f} ms  rows {s['rows']}")
    return 0


def cmd_simulate(args) -> int:
    from detplace import fixtures
    from detplace.simulate import load_scenario, result_to_dict, run_scenario

    topo = load_topology(args.topology) if args.topology else fixtures.scenario_topology()
    pool = load_pool(args.pool) if args.pool else fixtures.scenario_pool()
    events = load_scenario(args.scenario) if args.scenario else fixtures.scenario_events()
    result = run_scenario(topo, pool, _solver(args), events)
    _emit(result_to_dict(result), args.out)
    if args.out:
        for i, ph in enumerate(result.phases):
            sel = {n: sorted(s) for n, s in ph.plan.selections().items()}
            print(f"phase {i} ({ph.reconfig_wall_time:.1f} ms): {sel}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detplace", description=__doc__)
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        _common(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write a random topology and detector pool")
    p.add_argument("--n-ids", type=int, default=30)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--x-max", type=int, default=30)
    p.add_argument("--n-data-types", type=int, default=6)
    p.add_argument("--out-topology", required=True)
    p.add_argument("--out-pool", required=True)

    p = add("optimize", cmd_optimize, "place detectors on a topology")
    p.add_argument("--topology", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out")

    p = add("validate", cmd_validate, "check a plan against a topology and pool")
    p.add_argument("--topology", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--plan", required=True)

    p = add("bench", cmd_bench, "compare backends on generated architectures (CSV)")
    p.add_argument("--n-architectures", type=int, default=20)
    p.add_argument("--ids-counts", default="20-40", help="e.g. '20-40' or '10,20'")
    p.add_argument("--node-sweep", default="", help="target node counts, e.g. '10,50,100'")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--backends", default=",".join(SOLVER_CHOICES))
    p.add_argument("--output")

    p = add("simulate", cmd_simulate, "replay a reconfiguration scenario (bundled one by default)")
    p.add_argument("--topology")
    p.add_argument("--pool")
    p.add_argument("--scenario")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DetplaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
