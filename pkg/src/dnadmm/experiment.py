"""
Experiment configuration and orchestration: build the problem, compute the
reference, run the agent simulator for each truncation order and write the
trace CSVs plus a run summary.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .admm import Hyper
from .datasets import normalize, parse_csv_dataset, parse_libsvm, partition_even
from .graph import Graph, build_random_connected
from .instances import synthetic_lasso
from .objective import L1, Problem, QuadraticCost, Zero
from .reference import reference_solution
from .simulator import run_distributed
from .splitting import gamma_bound

__all__ = ["ExperimentConfig", "build_problem", "run_experiment", "sweep", "TRACE_COLUMNS"]

TRACE_COLUMNS = ("iter", "comm_rounds_cum", "rel_cost", "e_norm", "gamma_dx", "r_a", "r_c")


@dataclass
class ExperimentConfig:
    n: int = 20
    p: float = 0.2
    seed: int = 0
    graph_path: str | None = None
    anchor: int = 0
    mu: float = 1.0
    eps: float = 1.0
    K: list = field(default_factory=lambda: [0, 1, 3])
    weight: float = 0.002
    iters: int = 300
    tol: float = 1e-8
    dataset_path: str | None = None
    dataset_format: str = "libsvm"
    dims: int | None = None
    label_column: str | None = None
    normalize: bool = False
    shuffle_seed: int | None = None
    ridge: float = 0.0
    shards_path: str | None = None
    synthetic_d: int = 6
    synthetic_rows: int = 3080
    output: str = "runs"
    cache_dir: str | None = None
    parallel: bool = False

    def __post_init__(self):
        if isinstance(self.K, int):
            self.K = [self.K]
        self.validate()

    def validate(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if not self.mu > 0 or self.eps < 0 or self.weight < 0 or self.ridge < 0:
            raise ValueError("need mu > 0 and eps, weight, ridge >= 0")
        if any(int(k) != k or k < 0 for k in self.K):
            raise ValueError("every K must be a nonnegative integer")
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")
        if self.dataset_format not in ("libsvm", "csv"):
            raise ValueError(f"unknown dataset format {self.dataset_format!r}")
        for name in ("graph_path", "dataset_path", "shards_path"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(f"{name}: {path} does not exist")
        if self.dataset_path and self.dataset_format == "libsvm" and not self.dims:
            raise ValueError("LIBSVM ingestion needs dims")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def load_shards(path):
    with open(path) as fh:
        doc = json.load(fh)
    shards = sorted(doc["shards"] if isinstance(doc, dict) else doc, key=lambda s: s["agent"])
    return [QuadraticCost.from_shard(s) for s in shards]


def build_problem(cfg):
    if cfg.graph_path:
        graph = Graph.from_json(cfg.graph_path)
    else:
        graph = build_random_connected(cfg.n, cfg.p, cfg.seed, anchor=cfg.anchor)
    reg = L1(cfg.weight) if cfg.weight > 0 else Zero()
    if cfg.shards_path:
        costs = load_shards(cfg.shards_path)
    elif cfg.dataset_path:
        if cfg.dataset_format == "libsvm":
            ds = parse_libsvm(cfg.dataset_path, cfg.dims)
        else:
            ds = parse_csv_dataset(cfg.dataset_path, cfg.label_column)
        if cfg.normalize:
            ds = normalize(ds)
        costs = partition_even(ds, graph.n, cfg.shuffle_seed, cfg.ridge)
    else:
        rows = max(cfg.synthetic_rows // graph.n, 1)
        return synthetic_lasso(graph.n, cfg.synthetic_d, rows, cfg.weight, seed=cfg.seed,
                               ridge=cfg.ridge, graph=graph)
    return Problem(graph, costs, reg)


def _trace_rows(problem, trace, star, hyper, tol):
    b = problem.bounds
    gamma = gamma_bound(problem.n, hyper.mu, b.m_f, b.M_f, hyper.eps, hyper.K)
    rows = trace.metrics(problem, star)
    for row in rows:
        t = row["iter"]
        row["gamma_dx"] = gamma * float(np.linalg.norm(trace.x[t] - trace.x[t - 1])) if t else float("nan")
    for k, row in enumerate(rows):
        if k and max(row["r_a"], row["r_c"]) < tol:
            return rows[:k + 1], True
    return rows, False


def _write_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) if c in ("iter", "comm_rounds_cum") else repr(float(r[c]))
                              for c in TRACE_COLUMNS) + "\n")


def run_experiment(cfg):
    """Run the configured experiment; returns the written file paths.

    Outputs in ``cfg.output``: ``trace_K{K}.csv`` per order, ``agents_K{K}.csv``
    with per-agent iterates, ``config.json`` (fully resolved) and
    ``summary.json``. Partial outputs are removed if anything fails.
    """
    cfg.validate()
    os.makedirs(cfg.output, exist_ok=True)
    written = []
    t0 = time.time()
    try:
        problem = build_problem(cfg)
        star = reference_solution(problem, cache_dir=cfg.cache_dir)
        summary = {
            "config": cfg.to_dict(),
            "graph": problem.graph.to_dict(),
            "reference": {"fingerprint": star.fingerprint, "obj_star": star.obj_star,
                          "x_star": star.x_star.tolist()},
            "runs": {},
        }
        cfg_path = os.path.join(cfg.output, "config.json")
        with open(cfg_path, "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=2)
        written.append(cfg_path)
        for K in cfg.K:
            hyper = Hyper(mu=cfg.mu, eps=cfg.eps, K=int(K), max_iters=cfg.iters, tol=cfg.tol)
            start = time.time()
            trace, stats = run_distributed(
                problem, hyper, cfg.iters, parallel=cfg.parallel,
                stop=lambda tr: max(tr.residuals(problem, len(tr.x) - 1)) < cfg.tol,
            )
            rows, converged = _trace_rows(problem, trace, star, hyper, cfg.tol)
            path = os.path.join(cfg.output, f"trace_K{K}.csv")
            _write_csv(path, rows)
            written.append(path)
            agents_path = os.path.join(cfg.output, f"agents_K{K}.csv")
            trace.per_agent_csv(agents_path)
            written.append(agents_path)
            summary["runs"][str(K)] = {
                "converged": converged,
                "iterations": len(rows) - 1,
                "final_rel_cost": rows[-1]["rel_cost"] if rows else None,
                "comm": stats.to_dict(),
                "wall_time": time.time() - start,
            }
        summary["wall_time"] = time.time() - t0
        sum_path = os.path.join(cfg.output, "summary.json")
        with open(sum_path, "w") as fh:
            json.dump(summary, fh, indent=2)
        written.append(sum_path)
    except BaseException:
        for p in written:
            if os.path.exists(p):
                os.remove(p)
        raise
    return written


def sweep(cfg, mus, epss, target=1e-6):
    """Iterations to reach `target` relative cost over a (mu, eps, K) grid."""
    from .admm import run

    problem = build_problem(cfg)
    star = reference_solution(problem, cache_dir=cfg.cache_dir)
    out = []
    for mu in mus:
        for eps in epss:
            for K in cfg.K:
                hyper = Hyper(mu=mu, eps=eps, K=int(K), max_iters=cfg.iters, tol=0.0)
                try:
                    trace = run(problem, hyper, star=star)
                    hit = trace.iterations_to("rel_cost", target)
                except FloatingPointError:
                    hit = None
                out.append({"mu": mu, "eps": eps, "K": int(K), "iters_to_target": hit})
    return out
