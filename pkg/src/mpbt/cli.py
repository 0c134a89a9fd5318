"""Command-line entry point: ``mpbt gen|run|experiment|poa|milp-export``.

Exit codes: 0 success, 2 invalid input, 3 infeasible or disconnected,
4 equal-share dynamics caught in a cycle, 1 anything else (I/O).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import MPBTError, NonConvergence, ValidationError
from .exact import build_milp, export_lp
from .experiment import ExperimentConfig, metrics_for, poa_csv, poa_sweep, run_algorithm, run_experiment, write_csv
from .files import dump_json, load_instance, save_instance, save_tree
from .game import CYCLE
from .netmodel import ChannelParams, InstanceSampler, generate_connected_instance
from .tree import to_dot

RUN_ALGOS = ("csg", "bip", "bipsw", "bdp", "gbbtc", "exact", "milp-export")


def _out_dir(path) -> Path:
    p = Path(path or ".")
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_gen(args) -> int:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        sampler = cfg.sampler()
        fixed = (cfg.fixed_power,) if args.fixed_connected else ()
    else:
        sampler = InstanceSampler(side=args.side, channel=ChannelParams.from_db())
        fixed = ()
    if args.nodes < 2:
        raise ValidationError("an instance needs at least 2 nodes (source included)")
    inst, _ = generate_connected_instance(sampler, args.nodes, np.random.default_rng(args.seed), fixed)
    save_instance(inst, args.out)
    return 0


def cmd_run(args) -> int:
    inst = load_instance(args.instance)
    out = _out_dir(args.out)
    if args.algo == "milp-export":
        export_lp(build_milp(inst), out / "model.lp")
        return 0
    algo = f"csg-{args.scheme}" if args.algo == "csg" else args.algo
    fixed = None if args.fixed_power_mw is None else args.fixed_power_mw / 1000.0
    tree, trace = run_algorithm(algo, inst, args.seed, fixed, args.rounds_cap, args.exact_limit)
    save_tree(tree, out / "tree.json")
    (out / "tree.dot").write_text(to_dot(tree))
    m = metrics_for(tree, trace, inst, inst.n_nodes, 0, algo, 1)
    if trace is not None:
        (out / "trace.jsonl").write_text(trace.to_jsonl())
    dump_json(m.__dict__, out / "metrics.json")
    print(json.dumps(m.__dict__, sort_keys=True))
    if trace is not None and trace.outcome == CYCLE:
        raise NonConvergence(f"{algo} dynamics entered a cycle of {len(trace.cycle_moves)} moves")
    if trace is not None and not trace.converged:
        raise NonConvergence(f"{algo} hit the round cap without converging")
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    rows = run_experiment(cfg)
    text = write_csv(rows, args.out or cfg.out_csv)
    if not (args.out or cfg.out_csv):
        sys.stdout.write(text)
    return 0


def cmd_poa(args) -> int:
    text = poa_csv(poa_sweep(args.N, args.alpha, args.pc, args.epsilon))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_milp_export(args) -> int:
    export_lp(build_milp(load_instance(args.instance)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpbt", description="Minimum-power broadcast trees: games, heuristics, exact solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="draw a connected random instance")
    g.add_argument("--nodes", type=int, required=True, help="|Q|, source included")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--side", type=float, default=250.0)
    g.add_argument("--config", help="experiment config supplying sampling parameters")
    g.add_argument("--fixed-connected", action="store_true", help="also require connectivity at the config's fixed power")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="build one tree on an instance file")
    r.add_argument("instance")
    r.add_argument("--algo", choices=RUN_ALGOS, default="csg")
    r.add_argument("--scheme", choices=("mc", "sv", "es"), default="mc")
    r.add_argument("--fixed-power-mw", type=float,
                   help="fixed transmit power for gbbtc (default 200) and csg es (default: power control)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--rounds-cap", type=int, default=1000)
    r.add_argument("--exact-limit", type=int, default=10)
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="Monte-Carlo sweep from a JSON config")
    e.add_argument("config")
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_experiment)

    q = sub.add_parser("poa", help="line-topology price-of-anarchy grid")
    q.add_argument("--N", type=int, nargs="+", required=True)
    q.add_argument("--alpha", type=float, default=3.0)
    q.add_argument("--pc", type=float, nargs="+", required=True)
    q.add_argument("--epsilon", type=float, default=0.0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_poa)

    m = sub.add_parser("milp-export", help="write the integer program as an LP file")
    m.add_argument("instance")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_milp_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MPBTError as exc:
        print(f"mpbt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
