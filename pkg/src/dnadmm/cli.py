"""
Command-line entry point.

Subcommands: ``gen-graph``, ``ingest``, ``solve-ref``, ``run``, ``certify``
and ``sweep``. Exit status is 0 on success, 1 on validation errors and 2 when
the method diverges.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from .admm import Hyper, theory_eps_lower_bound
from .certify import certify
from .datasets import normalize, parse_csv_dataset, parse_libsvm, partition_even
from .exceptions import DNADMMError, NonFiniteError
from .experiment import ExperimentConfig, build_problem, run_experiment, sweep
from .graph import build_random_connected
from .instances import toy_problem
from .reference import reference_solution

log = logging.getLogger("dnadmm")

CONFIG_FLAGS = {
    "n": int, "p": float, "seed": int, "graph_path": str, "anchor": int, "mu": float,
    "eps": float, "weight": float, "iters": int, "tol": float, "dataset_path": str,
    "dataset_format": str, "dims": int, "label_column": str, "shuffle_seed": int,
    "ridge": float, "shards_path": str, "synthetic_d": int, "synthetic_rows": int,
    "output": str, "cache_dir": str,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that status 2 stays reserved for divergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    for name, typ in CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--K", dest="K", type=int, nargs="+", default=None)
    p.add_argument("--normalize", dest="normalize", action="store_true", default=None)
    p.add_argument("--parallel", dest="parallel", action="store_true", default=None)


def _config(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    for name in list(CONFIG_FLAGS) + ["K", "normalize", "parallel"]:
        v = getattr(args, name, None)
        if v is not None:
            doc[name] = v
    return ExperimentConfig.from_dict(doc)


def cmd_gen_graph(args):
    g = build_random_connected(args.n, args.p, args.seed, anchor=args.anchor)
    text = g.to_json(args.out)
    if args.out is None:
        print(text)
    else:
        log.info("wrote graph with n=%d m=%d to %s", g.n, g.m, args.out)


def cmd_ingest(args):
    if args.format == "libsvm":
        if not args.dims:
            raise ValueError("--dims is required for LIBSVM input")
        ds = parse_libsvm(args.input, args.dims)
    else:
        ds = parse_csv_dataset(args.input, args.label_column)
    if args.normalize:
        ds = normalize(ds)
    costs = partition_even(ds, args.agents, args.shuffle_seed, args.ridge)
    doc = {"provenance": ds.provenance, "d": ds.d, "rows": len(ds),
           "shards": [c.to_shard(i) for i, c in enumerate(costs)]}
    with open(args.out, "w") as fh:
        json.dump(doc, fh)
    print(f"{len(ds)} rows, d={ds.d}, {args.agents} shards -> {args.out}")


def cmd_solve_ref(args):
    cfg = _config(args)
    problem = build_problem(cfg)
    sol = reference_solution(problem, cache_dir=cfg.cache_dir)
    text = json.dumps(sol.to_dict(), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(f"obj* = {sol.obj_star!r}  x* = {sol.x_star.tolist()}")


def cmd_run(args):
    cfg = _config(args)
    for path in run_experiment(cfg):
        print(path)


def cmd_certify(args):
    if args.config:
        cfg = _config(args)
        problem = build_problem(cfg)
        mu, eps = cfg.mu, cfg.eps
        K = cfg.K[0]
    else:
        problem = toy_problem(seed=args.seed or 0)
        mu = args.mu if args.mu is not None else 1.0
        eps = args.eps if args.eps is not None else 1.0
        K = args.K[0] if args.K else 2
    hyper = Hyper(mu=mu, eps=eps, K=K)
    if args.theory:
        b = problem.bounds
        eps_t = theory_eps_lower_bound(b.m_f, b.M_f, problem.n, mu)
        hyper = Hyper(mu=mu, eps=eps_t + 1.0, K=K)
    report = certify(problem, hyper, iters=args.certify_iters)
    print(report.table())
    if args.out:
        report.to_json(args.out)
    return 0 if report.passed else 1


def cmd_sweep(args):
    cfg = _config(args)
    rows = sweep(cfg, args.mu_list, args.eps_list, args.target)
    w = csv.DictWriter(sys.stdout, fieldnames=["mu", "eps", "K", "iters_to_target"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


def build_parser():
    parser = _Parser(prog="dnadmm", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="sample a connected random graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--anchor", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("ingest", help="parse a dataset and write per-agent shards")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["libsvm", "csv"], default="libsvm")
    p.add_argument("--dims", type=int)
    p.add_argument("--label-column")
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--shuffle-seed", type=int)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("solve-ref", help="centralized reference solution")
    _add_config_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_ref)

    p = sub.add_parser("run", help="simulate DN-ADMM(K) and write traces")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="check every convergence inequality along a run")
    _add_config_flags(p)
    p.add_argument("--theory", action="store_true", help="use eps just above the rate theorem's bound")
    p.add_argument("--certify-iters", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="grid over mu and eps; iterations to a target relative cost")
    _add_config_flags(p)
    p.add_argument("--mu-list", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    p.add_argument("--eps-list", type=float, nargs="+", default=[0.0, 1.0])
    p.add_argument("--target", type=float, default=1e-6)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = args.func(args)
    except NonFiniteError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 2
    except (DNADMMError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
