"""Command line entry point: ``dynplace <subcommand> [options]``."""
import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from .experiment import (
    METHODS,
    ExperimentConfig,
    InvariantViolation,
    load_config,
    run_experiment,
    sweep_k,
    synthetic_sst_grid,
    write_config_echo,
    write_outputs,
    write_sweep_csv,
)
from .filters import exact_filter_matrix
from .graph import random_sensor_graph, spectrum, write_edgelist
from .placement import PlacementState, distributed_gap_check

log = logging.getLogger("dynplace")

EXIT_OK = 0
EXIT_VIOLATION = 2


def _base_config(args, scenario):
    if scenario == "real":
        base = ExperimentConfig.real()
    else:
        base = ExperimentConfig(scenario=scenario)
    if args.config:
        base = load_config(args.config, base)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicates is not None:
        changes["replicates"] = args.replicates
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.workers is not None:
        changes["workers"] = args.workers
    if getattr(args, "methods", None):
        changes["methods"] = tuple(args.methods.split(","))
    if getattr(args, "data", None):
        changes["data_path"] = args.data
    if args.out:
        changes["out_dir"] = args.out
    return base.replace(**changes)


def _out_dir(cfg):
    out = cfg.out_dir or "results"
    os.makedirs(out, exist_ok=True)
    return out


def _ensure_grid(cfg, out):
    if cfg.data_path:
        return cfg
    path = os.path.join(out, "synthetic_grid.csv")
    log.warning("no data file given; writing a synthetic stand-in grid to %s", path)
    synthetic_sst_grid(path, seed=cfg.seed)
    return cfg.replace(data_path=path)


def cmd_run(args, scenario):
    cfg = _base_config(args, scenario)
    out = _out_dir(cfg)
    if scenario == "real":
        cfg = _ensure_grid(cfg, out)
    result = run_experiment(cfg)
    write_outputs(result, out)
    if scenario != "real":
        # the first replicate's graph, for reproducing plots
        from .experiment import make_scenario

        write_edgelist(make_scenario(cfg, 0).graph, os.path.join(out, "graph.txt"))
    for method in cfg.methods:
        M = result.mse_matrix(method)
        if M.size:
            print(f"{method:13s} mean MSE {M.mean():.6g} over {M.shape[0]} replicates")
    if result.aborted:
        for rep, method, reason in result.aborted:
            print(f"aborted: replicate {rep} {method}: {reason}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_sweep(args):
    scenario = args.scenario
    cfg = _base_config(args, scenario)
    out = _out_dir(cfg)
    if scenario == "real":
        cfg = _ensure_grid(cfg, out)
    ks = [int(k) for k in args.k_values.split(",")]
    rows = sweep_k(cfg, ks)
    write_sweep_csv(os.path.join(out, "sweep_k.csv"), rows)
    write_config_echo(os.path.join(out, "config.echo"), cfg)
    for k, mean, std in rows:
        print(f"K={k:4d} mean MSE {mean:.6g} (std {std:.3g})")
    return EXIT_OK


def cmd_gap(args):
    cfg = _base_config(args, "synthetic-bl")
    out = _out_dir(cfg)
    n = args.nodes
    k = args.sensors
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)
    bad = 0
    with open(os.path.join(out, "gap_check.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "distributed_sum", "centralized_sum", "lower_bound", "holds"])
        for i, ss in enumerate(seeds):
            rng = np.random.default_rng(ss)
            graph = random_sensor_graph(n, rng)
            G = exact_filter_matrix(spectrum(graph), cfg.filter_spec)
            A = rng.standard_normal((n, args.atoms))
            pos = rng.choice(n, size=k, replace=False)
            P = math.inf if cfg.hop_limit is None else cfg.hop_limit
            rep = distributed_gap_check(A.T @ G, graph, PlacementState(pos, P), k)
            bad += not rep.holds
            w.writerow([i, repr(rep.distributed_sum), repr(rep.centralized_sum), repr(rep.lower), int(rep.holds)])
    print(f"bound held on {cfg.replicates - bad}/{cfg.replicates} instances")
    return EXIT_VIOLATION if bad else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dynplace", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML/JSON key-value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--jobs", type=int, help="processes for replicates")
        p.add_argument("--workers", type=int, help="threads for the per-sensor loop")
        return p

    for name in ("synth-bl", "synth-pc", "real"):
        p = common(sub.add_parser(name))
        p.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
        if name == "real":
            p.add_argument("--data", help="grid CSV: lat,lon,t_0,...")
    p = common(sub.add_parser("sweep-k"))
    p.add_argument("--k-values", default="5,10,20")
    p.add_argument("--scenario", default="real", choices=("real", "synthetic-bl", "synthetic-pc"))
    p.add_argument("--data")
    p = common(sub.add_parser("gap-check"))
    p.add_argument("--nodes", type=int, default=30)
    p.add_argument("--sensors", type=int, default=4)
    p.add_argument("--atoms", type=int, default=6)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth-bl":
            return cmd_run(args, "synthetic-bl")
        if args.command == "synth-pc":
            return cmd_run(args, "synthetic-pc")
        if args.command == "real":
            return cmd_run(args, "real")
        if args.command == "sweep-k":
            return cmd_sweep(args)
        return cmd_gap(args)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
