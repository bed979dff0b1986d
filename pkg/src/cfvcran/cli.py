"""Command line entry point: sweep, maxrate, solve-one, verify."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from cfvcran import harness
from cfvcran import planner as pl
from cfvcran.sysconfig import ConfigError, SystemConfig, config_from_dict, load_config

MODES = {"both": ("CellFree", "SmallCell"), "CellFree": ("CellFree",), "SmallCell": ("SmallCell",)}


def _se_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad SE grid {text!r}: {exc}") from exc


def _common(p: argparse.ArgumentParser, single_mode=False) -> None:
    p.add_argument("--config", type=Path, help="JSON config file (missing keys take defaults)")
    p.add_argument("--seed", type=int, default=None, help="first setup seed (default: rng_seed of the config)")
    p.add_argument("--mc", type=int, default=None, help="Monte Carlo realizations per setup")
    p.add_argument("--node-budget", type=int, default=None, help="branch-and-bound node limit per problem")
    p.add_argument("--time-budget", type=float, default=None, help="branch-and-bound wall-time limit (s) per problem")
    if single_mode:
        p.add_argument("--mode", choices=["CellFree", "SmallCell"], default="CellFree")
    else:
        p.add_argument("--mode", choices=sorted(MODES), default="both")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfvcran", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="power and feasibility versus the common SE target")
    _common(p)
    p.add_argument("--setups", type=int, default=1)
    p.add_argument("--se-grid", type=_se_grid, default=[0.0, 0.5, 1.0, 1.5, 2.0])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="exit nonzero if any point hits the budget")

    p = sub.add_parser("maxrate", help="largest common SE each setup supports")
    _common(p)
    p.add_argument("--setups", type=int, default=1)
    p.add_argument("--tol", type=float, default=0.01, help="bisection tolerance in bit/s/Hz")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("solve-one", help="plan a single setup and print it")
    _common(p, single_mode=True)
    p.add_argument("--se", type=float, required=True)
    p.add_argument("--out", type=Path, help="write the plan as JSON")
    p.add_argument("--dump-model", type=Path, help="write the planning model as JSON")

    p = sub.add_parser("verify", help="re-check a plan file against its setup")
    p.add_argument("plan", type=Path)
    p.add_argument("--config", type=Path, help="override the config stored in the plan")
    return parser


def _config(path: Path | None) -> SystemConfig:
    return load_config(path) if path else SystemConfig()


def _spec(args, cfg, se_grid) -> harness.SweepSpec:
    return harness.SweepSpec(
        se_grid=se_grid, setups=args.setups, modes=MODES[args.mode],
        seed=cfg.rng_seed if args.seed is None else args.seed,
        node_budget=args.node_budget, time_budget=args.time_budget, mc=args.mc,
    )


def _print_plan(plan: pl.NetworkPlan) -> None:
    print(f"objective_w {plan.objective!r}")
    print(f"active_aps {plan.active_aps} active_lcs {plan.active_lcs} active_dus {plan.active_dus}")
    for name, value in plan.breakdown.rows():
        print(f"{name}_w {value!r}")
    for k, row in enumerate(plan.x.astype(int)):
        aps = " ".join(str(l) for l in row.nonzero()[0])
        print(f"ue {k} aps [{aps}] sinr {float(plan.sinr[k])!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(getattr(args, "config", None)) if args.command != "verify" else None
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "sweep":
        report = harness.run_sweep(_spec(args, cfg, args.se_grid), cfg, workers=args.workers)
        for path in harness.emit_report(report, args.out):
            print(path)
        unresolved = sum(p.status == harness.UNRESOLVED for p in report.points)
        if unresolved:
            print(f"warning: {unresolved} point(s) hit the budget", file=sys.stderr)
        return 1 if args.strict and unresolved else 0

    if args.command == "maxrate":
        report = harness.run_maxrate(_spec(args, cfg, []), cfg, tol_bits=args.tol, workers=args.workers)
        for path in harness.emit_report(report, args.out):
            print(path)
        for row in harness.maxrate_summary(report.maxrate):
            print(" ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
        unresolved = sum(r.status == harness.UNRESOLVED for r in report.maxrate)
        return 1 if args.strict and unresolved else 0

    if args.command == "solve-one":
        seed = cfg.rng_seed if args.seed is None else args.seed
        stats = harness.setup_statistics(cfg, seed, args.mc)
        inst = pl.PlanningInstance.from_se(stats, cfg, args.se, args.mode)
        if args.dump_model:
            from cfvcran.conic_solver import dump_problem

            dump_problem(pl.build_model(inst), args.dump_model)
        rep = pl.branch_and_bound(inst, node_limit=args.node_budget, time_limit=args.time_budget)
        print(f"status {rep.status.value} nodes {rep.nodes} lower_bound {rep.lower_bound!r}")
        if rep.incumbent is None:
            return 1 if rep.status == pl.BnBStatus.TIMED_OUT else 0
        _print_plan(rep.incumbent)
        if args.out:
            meta = {"config": cfg.to_dict(), "seed": seed, "se": args.se, "mode": args.mode, "mc": args.mc}
            pl.save_plan(rep.incumbent, args.out, meta)
        return 0

    # verify
    try:
        plan, meta = pl.load_plan(args.plan)
        cfg = load_config(args.config) if args.config else config_from_dict(meta["config"])
        stats = harness.setup_statistics(cfg, meta["seed"], meta.get("mc"))
        inst = pl.PlanningInstance.from_se(stats, cfg, meta["se"], meta["mode"])
    except (OSError, KeyError, ConfigError, json.JSONDecodeError) as exc:
        print(f"error: cannot load {args.plan}: {exc!r}", file=sys.stderr)
        return 2
    problems = pl.verify_plan(plan, inst)
    for line in problems:
        print(line)
    print("ok" if not problems else f"{len(problems)} violation(s)")
    return 0 if not problems else 1


if __name__ == "__main__":
    sys.exit(main())
