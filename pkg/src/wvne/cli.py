"""Command line entry point: ``wvne gen|solve|validate|emit|experiment``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .emitter import DEFAULT_VARIABLE_CAP, ModelTooLarge, emit_model
from .exact import BudgetExhausted, ExactConfig, Infeasible, solve_exact
from .harness import load_plan, problems, report, run_experiment, summarize, summary_table
from .heuristic import HeuristicParams, parse_k, solve_heuristic
from .model import InstanceError, dump_instance, dump_solution, load_instance, load_solution, objective
from .scenario import DEFAULT_NOISE_FLOOR, DEFAULT_SINR_THRESHOLD, ScenarioConfig, generate_instance
from .validator import MODES, validate


def _limit(text: str) -> Optional[int]:
    return None if text.lower() in ("none", "inf", "unbounded") else int(text)


def cmd_gen(args) -> int:
    cfg = ScenarioConfig(
        args.nodes, seed=args.seed, room_side=args.room_side, noise_floor=args.noise_floor,
        sinr_threshold=args.sinr_threshold, block_weight=args.block_weight, max_slots=args.max_slots,
        source_count=args.sources,
    )
    net, app = generate_instance(cfg)
    dump_instance(net, app, args.out)
    print(f"wrote {args.out}: {net.n} nodes, {len(app.links)} overlay links")
    return 0


def cmd_solve(args) -> int:
    net, app = load_instance(args.instance)
    stats = {}
    try:
        if args.method == "exact":
            cfg = ExactConfig(node_limit=args.node_limit, mode=args.mode)
            sol = solve_exact(net, app, cfg, stats)
        else:
            params = HeuristicParams(level=args.level, k=args.k, seed=args.seed,
                                     backtrack_budget=args.backtrack_budget, max_path_hops=args.max_path_hops)
            sol = solve_heuristic(net, app, params, stats)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except BudgetExhausted as exc:
        print(f"search budget exhausted: {exc}", file=sys.stderr)
        return 3
    rep = validate(sol, net, app, args.mode)
    if not rep.ok:
        print(rep.to_text(), file=sys.stderr)
        return 1
    if args.out:
        dump_solution(sol, args.out)
    print(json.dumps({"method": args.method, "objective": objective(sol),
                      **{k: v for k, v in stats.items() if k != "objective"}}, default=str))
    return 0


def cmd_validate(args) -> int:
    net, app = load_instance(args.instance)
    rep = validate(load_solution(args.solution), net, app, args.mode)
    print(rep.to_text())
    return 0 if rep.ok else 1


def cmd_emit(args) -> int:
    net, app = load_instance(args.instance)
    try:
        model = emit_model(net, app, mode=args.mode, big_m=args.big_m, signal_model=args.signal_model,
                           variable_cap=args.max_vars)
    except ModelTooLarge as exc:
        print(str(exc), file=sys.stderr)
        return 2
    model.write_lp(args.out)
    fams = ", ".join(f"{k}={v}" for k, v in sorted(model.families().items()))
    print(f"wrote {args.out}: {len(model.variables)} variables, {len(model.constraints)} constraints ({fams})")
    return 0


def cmd_experiment(args) -> int:
    plan = load_plan(args.config)
    records = run_experiment(plan, jobs=args.jobs)
    timing = not args.no_timing
    paths = report(records, args.out_dir, timing=timing, plots=not args.no_plots)
    print(summary_table(summarize(records), timing=timing))
    for name, path in paths.items():
        print(f"{name}: {path}")
    bad = problems(records)
    for line in bad:
        print(f"INVARIANT: {line}", file=sys.stderr)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wvne", description="Wireless overlay embedding toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random room instance with the looped five-block overlay")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--room-side", type=float, default=25.0)
    g.add_argument("--noise-floor", type=float, default=DEFAULT_NOISE_FLOOR)
    g.add_argument("--sinr-threshold", type=float, default=DEFAULT_SINR_THRESHOLD)
    g.add_argument("--block-weight", type=float, default=1.0)
    g.add_argument("--max-slots", type=int, default=None)
    g.add_argument("--sources", type=int, default=1)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("--instance", type=Path, required=True)
    s.add_argument("--method", choices=("exact", "heuristic"), default="heuristic")
    s.add_argument("--mode", choices=MODES, default="relaxed")
    s.add_argument("--level", type=int, default=1)
    s.add_argument("--k", type=parse_k, default=None, help="neighbour limit, integer or 'all'")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--backtrack-budget", type=_limit, default=10_000)
    s.add_argument("--max-path-hops", type=int, default=None)
    s.add_argument("--node-limit", type=int, default=5_000_000)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="check a solution against every constraint")
    v.add_argument("--instance", type=Path, required=True)
    v.add_argument("--solution", type=Path, required=True)
    v.add_argument("--mode", choices=MODES, default="relaxed")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("emit", help="write the constraint model in LP format")
    e.add_argument("--instance", type=Path, required=True)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--mode", choices=MODES, default="strict")
    e.add_argument("--big-m", type=float, default=None)
    e.add_argument("--signal-model", choices=("gamma", "unit"), default=None)
    e.add_argument("--max-vars", type=_limit, default=DEFAULT_VARIABLE_CAP)
    e.set_defaults(func=cmd_emit)

    x = sub.add_parser("experiment", help="run a seeded sweep and write CSV + SVG figures")
    x.add_argument("--config", type=Path, required=True, help="plan file (JSON or YAML)")
    x.add_argument("--out-dir", type=Path, required=True)
    x.add_argument("--jobs", type=int, default=1)
    x.add_argument("--no-timing", action="store_true", help="blank runtime columns (byte-stable output)")
    x.add_argument("--no-plots", action="store_true")
    x.set_defaults(func=cmd_experiment)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
