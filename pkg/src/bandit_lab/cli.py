"""Command-line entry point: ``bandit-lab <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from .environments import make_bump_instance, strict_packing_of_domain, verify_instance
from .geometry import ArmSpace, build_grid_net, covering_check, proposition1_bounds
from .group_action import GROUP_KINDS, GroupError, dirichlet_domain, find_free_point, make_group, verify_group
from .harness import (
    LEMMA_COLUMNS,
    SweepConfig,
    lemma_checks,
    load_config_file,
    merge_config,
    prepare,
    result_rows,
    rows_to_csv,
    run_replications,
    stream,
    summarize,
    sweep,
    write_csv,
)
from .mesh_index import approx_neighborhood, build_tree
from .orbit_graph import clique_cover, neighborhood_of_orbit, vertices_covering_closure


def _emit_csv(rows, columns, path):
    text = rows_to_csv(rows, columns)
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {path}")
    return text


def cmd_net(args):
    space = ArmSpace.unit(args.dim)
    net = build_grid_net(space, args.delta)
    lo, hi = proposition1_bounds(space, args.delta)
    rep = covering_check(net, args.samples, rng=args.seed)
    print(f"vertices          {len(net)}")
    print(f"spacing           {net.spacing.tolist()}")
    print(f"volume bracket    [{lo:.6g}, {hi:.6g}]")
    print(f"covering check    {'pass' if rep.passed else 'FAIL'}  max min-distance {rep.max_min_distance:.6g} "
          f"over {rep.samples} samples")
    if args.csv:
        row = {"dim": args.dim, "delta": args.delta, "vertices": len(net), "lower": lo, "upper": hi,
               "max_min_distance": rep.max_min_distance, "covered": rep.passed}
        _emit_csv([row], list(row), args.csv)
    return 0 if rep.passed else 1


def cmd_verify_group(args):
    try:
        g = make_group(args.kind, args.dim)
    except GroupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rep = verify_group(g.elements, g.space, probes=args.probes, rng=args.seed)
    print(f"group {args.kind}  d={args.dim}  |G|={g.order}")
    for line in rep.lines():
        print("  " + line)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(g.to_json())
        print(f"wrote {args.json}")
    return 0 if rep.passed else 1


def cmd_graph_stats(args):
    group = make_group(args.group, args.dim)
    dom = dirichlet_domain(group, find_free_point(group, stream(args.seed, 3)))
    rows = []
    for delta in args.delta:
        net = build_grid_net(group.space, delta)
        vd = vertices_covering_closure(net, group, dom, rng=stream(args.seed, 4))
        cover = clique_cover(net, group, dom, delta, domain_vertices=vd)
        if args.engine == "tree":
            tree = build_tree(group.space, net)
            sizes = [len(approx_neighborhood(tree, group, v, 2 * delta)) for v in net.vertices]
        else:
            sizes = [len(neighborhood_of_orbit(group, net, v, 2 * delta)) for v in net.vertices]
        rows.append({
            "delta": delta, "V": len(net), "V_D": len(vd), "clique_count": len(cover),
            "ratio": len(cover) * group.order * delta ** args.dim,
            "mean_neighborhood": float(np.mean(sizes)), "engine": args.engine,
        })
    print(_emit_csv(rows, list(rows[0]), args.csv), end="")
    return 0


def cmd_ensemble(args):
    group = make_group(args.group, args.dim)
    rng = stream(args.seed, 1)
    dom = dirichlet_domain(group, find_free_point(group, rng))
    pack = strict_packing_of_domain(dom, group, args.delta, rng=rng)
    print(f"strict packing W: {len(pack)} points at delta={args.delta}")
    for k, p in enumerate(pack.points):
        print(f"  W[{k}] = {np.round(p, 6).tolist()}")
    inst = make_bump_instance(pack, args.index, group)
    print(f"instance: {json.dumps(inst.descriptor)}")
    print(f"optimum value {inst.optimum_value:.6f}")
    rep = verify_instance(inst, rng=args.seed, points=group.images(inst.center))
    for line in rep.lines():
        print("  " + line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"descriptor": inst.descriptor, "W": pack.points.tolist()}, fh, indent=2)
        print(f"wrote {args.json}")
    return 0 if rep.passed else 1


def _experiment_from(args):
    file_values = load_config_file(args.config) if args.config else {}
    file_values = {k: v for k, v in file_values.items() if k not in ("groups", "deltas", "clique_stats", "workers")}
    flags = {
        "dim": args.dim, "group": getattr(args, "group", None), "instance": args.instance,
        "instance_group": args.instance_group, "algo": args.algo, "horizon": args.horizon,
        "delta": args.delta, "replications": args.replications, "base_seed": args.seed,
        "engine": args.engine, "arms": args.arms, "output": args.output,
    }
    if args.instance_param:
        params = dict(file_values.get("instance_params", {}))
        for item in args.instance_param:
            key, _, value = item.partition("=")
            params[key] = json.loads(value)
        flags["instance_params"] = params
    if flags["delta"] not in (None, "auto"):
        flags["delta"] = float(flags["delta"])
    return merge_config(file_values, flags)


def cmd_run(args):
    cfg = _experiment_from(args)
    setup = prepare(cfg)
    results = run_replications(setup, workers=args.workers)
    rows = result_rows(setup, results)
    for s in summarize(rows):
        print(f"{s['algo']} group={s['group']} |G|={s['group_order']} delta={float(s['delta']):.5g} "
              f"n={cfg.horizon} reps={s['reps']}: regret {s['mean_regret']:.2f} +- {s['stderr']:.2f}")
    if cfg.output:
        write_csv(rows, cfg.output)
        print(f"wrote {cfg.output}")
    if args.trace:
        trace = results[0][0]
        with open(args.trace, "w", newline="") as fh:
            fh.write("t,arm,instantaneous,cumulative\r\n")
            for t, (a, i, c) in enumerate(zip(trace.arms, trace.instantaneous, trace.cumulative), 1):
                fh.write(f"{t},{a},{i!r},{c!r}\r\n")
        print(f"wrote {args.trace}")
    return 0


def cmd_sweep(args):
    file_values = load_config_file(args.config) if args.config else {}
    base = _experiment_from(args)
    groups = args.groups.split(",") if args.groups else file_values.get("groups", [base.group])
    deltas_raw = args.deltas.split(",") if args.deltas else file_values.get("deltas", ["auto"])
    deltas = [d if d == "auto" else float(d) for d in deltas_raw]
    sc = SweepConfig(base, groups, deltas, clique_stats=args.clique_stats or file_values.get("clique_stats", False),
                     workers=args.workers)
    rows = sweep(sc)
    for s in summarize(rows):
        print(f"{s['algo']} group={s['group']} |G|={s['group_order']} delta={float(s['delta']):.5g} "
              f"reps={s['reps']}: regret {s['mean_regret']:.2f} +- {s['stderr']:.2f}")
    if base.output:
        write_csv(rows, base.output)
        print(f"wrote {base.output}")
    return 0


def cmd_lemma_checks(args):
    rep = lemma_checks(args.group, args.dim, args.deltas, seed=args.seed, band=args.band)
    for line in rep.lines():
        print(line)
    if args.csv:
        _emit_csv(rep.rows, LEMMA_COLUMNS, args.csv)
    return 0 if rep.passed else 1


def _experiment_flags(p):
    p.add_argument("--config", help="JSON or TOML file; explicit flags override it")
    p.add_argument("--dim", type=int)
    p.add_argument("--instance", choices=["bump", "smooth", "constant", "finite"])
    p.add_argument("--instance-group", dest="instance_group")
    p.add_argument("--instance-param", action="append", metavar="KEY=JSON",
                   help="instance parameter, e.g. delta=0.1 or seed=3 (repeatable)")
    p.add_argument("--algo", choices=["uniform-mesh", "uniform-mesh-n", "ucb-n", "invariant-ucb1"])
    p.add_argument("--horizon", type=int)
    p.add_argument("--delta", help="'auto' or a positive number")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="base seed (default: $BANDIT_LAB_SEED or 0)")
    p.add_argument("--engine", choices=["brute", "tree"])
    p.add_argument("--arms", type=int, help="K for the finite warm-up")
    p.add_argument("--output", help="CSV file for per-replication rows")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bandit-lab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("net", help="grid delta-net size, volume bracket and covering check")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("verify-group", help="check the group axioms for a stock group")
    p.add_argument("--kind", required=True, choices=GROUP_KINDS)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--probes", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write the group as JSON")
    p.set_defaults(func=cmd_verify_group)

    p = sub.add_parser("graph-stats", help="domain cover and clique cover sizes")
    p.add_argument("--group", required=True, choices=GROUP_KINDS)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--delta", type=float, nargs="+", required=True)
    p.add_argument("--engine", choices=["brute", "tree"], default="brute")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_graph_stats)

    p = sub.add_parser("ensemble", help="strict packing and one lower-bound ensemble member")
    p.add_argument("--group", required=True, choices=GROUP_KINDS)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("run", help="run replications of one experiment")
    _experiment_flags(p)
    p.add_argument("--group")
    p.add_argument("--trace", help="CSV with the per-round regret of the first replication")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid over groups and deltas")
    _experiment_flags(p)
    p.add_argument("--groups", help="comma-separated group kinds")
    p.add_argument("--deltas", help="comma-separated deltas or 'auto'")
    p.add_argument("--clique-stats", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lemma-checks", help="covering, clique and packing ratios across a delta ladder")
    p.add_argument("--group", required=True, choices=GROUP_KINDS)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--deltas", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    p.add_argument("--band", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_lemma_checks)
    return ap


_DIMS = {"reflect1d": 1, "dihedral2": 2, "dihedral4": 2, "dihedral8": 2, "rotation4": 2}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "dim", 0) is None and args.command == "ensemble":
        args.dim = _DIMS.get(args.group, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
