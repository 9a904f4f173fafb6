"""Command line: gen, solve, run, compare."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import EngineParams
from .exact import OracleExceeded, OracleLimits
from .experiment import (POLICIES, read_csv, reports_to_csv, run_experiment, run_policy, summarize,
                         write_csv)
from .scenarios import SCALES, ScenarioParams, generate_scenario, load_catalog, save_catalog
from .state import DeploymentState, check_feasibility


def _gen(args):
    cat = generate_scenario(ScenarioParams(scale=args.scale, seed=args.seed))
    save_catalog(cat, args.out)
    print(f"wrote {args.out}: {len(cat.services)} services, {len(cat.functions)} functions", file=sys.stderr)


def _solve(args):
    cat = load_catalog(args.scenario)
    state = DeploymentState.empty()
    if args.state:
        state = DeploymentState.from_dict(json.loads(Path(args.state).read_text()))
    params = EngineParams(Delta=args.delta, Gamma=args.gamma, Lambda=args.max_iter, N=args.halving_n,
                          mu0=args.mu0, seed=args.seed)
    limits = OracleLimits(args.max_nodes, args.time_budget)
    plan = run_policy(args.policy, cat, state, params, limits)
    if isinstance(plan, OracleExceeded):
        out = {"policy": args.policy, "status": "exceeded", "reason": plan.reason, "leaves": plan.leaves}
    else:
        out = plan.to_dict(explain=args.explain)
        out["status"] = "ok"
        out["violations"] = check_feasibility(plan.assignment, state, cat).to_dict()["violations"]
        if args.save_state:
            nxt = DeploymentState.after(plan.assignment, set(cat.services))
            Path(args.save_state).write_text(json.dumps(nxt.to_dict(), indent=2) + "\n")
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _run(args):
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICIES]
    if bad:
        raise SystemExit(f"unknown policies: {', '.join(bad)}")
    params = ScenarioParams(scale=args.scale)
    limits = OracleLimits(args.max_nodes, args.time_budget)
    reports = run_experiment(params, policies, args.runs, args.epochs, args.seed, limits=limits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports_to_csv(reports, out / "results.csv")
    if args.record_timing:
        reports_to_csv(reports, out / "timings.csv", record_timing=True)
    print(f"wrote {len(reports)} rows to {out / 'results.csv'}", file=sys.stderr)


def _compare(args):
    src = Path(args.inp)
    files = sorted(src.glob("**/results.csv")) if src.is_dir() else [src]
    rows = [r for f in files for r in read_csv(f)]
    timing = sorted(src.glob("**/timings.csv")) if src.is_dir() else []
    if timing:
        rows = [r for f in timing for r in read_csv(f)]
    table = summarize(rows)
    write_csv(table, args.out)
    print(f"summarized {len(rows)} rows from {len(files)} file(s) into {args.out}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oreo", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a scenario JSON file")
    g.add_argument("--scale", choices=sorted(SCALES), default="S")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen)

    s = sub.add_parser("solve", help="solve one scenario with one policy")
    s.add_argument("--scenario", required=True)
    s.add_argument("--policy", choices=POLICIES, default="oreo")
    s.add_argument("--explain", action="store_true", help="include iteration and repair traces")
    s.add_argument("--state", help="deployment state JSON from a previous epoch")
    s.add_argument("--save-state", help="write the state the next epoch should start from")
    s.add_argument("--out", help="write the plan here instead of stdout")
    s.add_argument("--delta", type=float, default=1e-3)
    s.add_argument("--gamma", type=float, default=1e-3)
    s.add_argument("--lambda", dest="max_iter", type=int, default=300)
    s.add_argument("--halving-n", type=int, default=5)
    s.add_argument("--mu0", type=float, default=2.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-nodes", type=int, default=OracleLimits.max_nodes)
    s.add_argument("--time-budget", type=float, default=OracleLimits.time_budget)
    s.set_defaults(func=_solve)

    r = sub.add_parser("run", help="replay request epochs for several seeds and policies")
    r.add_argument("--scale", choices=sorted(SCALES), default="S")
    r.add_argument("--runs", type=int, default=1)
    r.add_argument("--epochs", type=int, default=1)
    r.add_argument("--policies", default="oreo,baseline")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--record-timing", action="store_true", help="also write timings.csv with wall times")
    r.add_argument("--max-nodes", type=int, default=OracleLimits.max_nodes)
    r.add_argument("--time-budget", type=float, default=OracleLimits.time_budget)
    r.set_defaults(func=_run)

    c = sub.add_parser("compare", help="aggregate results into means and 90%% intervals")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
