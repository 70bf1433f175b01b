"""Synthetic problem generators used by tests, the gallery and the CLI."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_random_connected
from .objective import L1, Problem, QuadraticCost, Zero

__all__ = ["toy_problem", "synthetic_lasso", "consensus_average_problem", "random_problem"]


def _costs_with_spectrum(n, d, lo, hi, rng):
    """Local least-squares costs whose Hessians have spectrum exactly within ``[lo, hi]``."""
    costs = []
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = rng.uniform(lo, hi, size=d)
        ev[0], ev[-1] = lo, hi
        A = np.sqrt(ev)[:, None] * Q.T
        b = rng.standard_normal(d)
        costs.append(QuadraticCost(A, b))
    return costs


def toy_problem(n=3, d=2, m_f=1.0, M_f=2.0, weight=0.5, seed=0, graph=None):
    """Small l1-regularized problem with local Hessian bounds exactly ``(m_f, M_f)``.

    The default graph is the path ``0 - 1 - ... - n-1`` anchored at agent 0.
    """
    rng = np.random.default_rng(seed)
    if graph is None:
        graph = Graph(n, [(i, i + 1) for i in range(n - 1)], anchor=0)
    reg = L1(weight) if weight else Zero()
    return Problem(graph, _costs_with_spectrum(graph.n, d, m_f, M_f, rng), reg)


def synthetic_lasso(n=20, d=6, rows_per_agent=8, weight=0.002, p=0.2, seed=0,
                    noise=0.1, ridge=0.0, sparsity=0.5, graph=None):
    """Distributed LASSO with Gaussian features and a sparse ground truth."""
    rng = np.random.default_rng(seed)
    if graph is None:
        graph = build_random_connected(n, p, seed)
    truth = rng.standard_normal(d) * (rng.random(d) > sparsity)
    costs = []
    for _ in range(graph.n):
        A = rng.standard_normal((rows_per_agent, d)) / np.sqrt(rows_per_agent)
        b = A @ truth + noise * rng.standard_normal(rows_per_agent)
        costs.append(QuadraticCost(A, b, ridge))
    return Problem(graph, costs, L1(weight) if weight else Zero())


def consensus_average_problem(centers, graph=None):
    """Scalar costs ``0.5 (x - c_i)^2``; the optimum is the mean of `centers`."""
    centers = np.asarray(centers, dtype=float)
    n = centers.size
    if graph is None:
        graph = Graph(n, [(i, i + 1) for i in range(n - 1)], anchor=0)
    costs = [QuadraticCost(np.ones((1, 1)), [c]) for c in centers]
    return Problem(graph, costs, Zero())


def random_problem(n, d, seed, p=0.3, weight=0.1, m_f=None, M_f=None):
    """Random instance on a random connected graph; optionally with pinned Hessian bounds."""
    rng = np.random.default_rng(seed)
    graph = build_random_connected(n, p, seed, anchor=int(rng.integers(n)))
    if m_f is not None:
        costs = _costs_with_spectrum(n, d, m_f, M_f, rng)
    else:
        costs = []
        for _ in range(n):
            A = rng.standard_normal((d + 3, d))
            costs.append(QuadraticCost(A, rng.standard_normal(d + 3), ridge=0.1))
    return Problem(graph, costs, L1(weight) if weight else Zero())
