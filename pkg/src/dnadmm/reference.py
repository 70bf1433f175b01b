"""
Centralized oracle: primal optimum, the dual optimum in ``range(B^T)`` and
KKT residuals. Used as ground truth for every convergence metric.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import MaxItersReached, OracleError
from .graph import anchored_laplacian, constraint_adjoint, constraint_map

__all__ = [
    "KKTResiduals",
    "ReferenceSolution",
    "solve_centralized",
    "dual_optimal",
    "kkt_residuals",
    "range_projection_residual",
    "reference_solution",
]


@dataclass(frozen=True)
class KKTResiduals:
    r_a: float
    r_b: bool
    r_b_margin: float
    r_c: float


def kkt_residuals(x, zhat, y, problem, tol=1e-8):
    """Stationarity, subgradient membership of the anchor dual, and feasibility.

    ``r_a = ||grad F(x) + B y||``, ``r_b`` tests ``y_{m+1} in dg(zhat)``,
    ``r_c = ||B^T x - z||``.
    """
    g = problem.graph
    r_a = float(np.linalg.norm(problem.grad_F(x) + constraint_adjoint(g, y)))
    margin = problem.regularizer.subgradient_margin(zhat, y[-1], tol)
    resid = constraint_map(g, x)
    resid[-1] -= zhat
    return KKTResiduals(r_a, bool(margin <= tol), float(margin), float(np.linalg.norm(resid)))


def _aggregate(costs):
    H = sum(c.hessian_matrix for c in costs)
    rhs = sum(c.design.T @ c.target for c in costs)
    return H, rhs


def _fixed_point_residual(x, H, rhs, r, step):
    return float(np.linalg.norm(x - r.prox(x - step * (H @ x - rhs), step)))


def _objective(x, H, rhs, const, r):
    return 0.5 * float(x @ H @ x) - float(rhs @ x) + const + r.value(x)


def _polish(x, H, rhs, r):
    """Re-solve the smooth system on the current l1 support (exact up to roundoff)."""
    w = getattr(r, "weight", None)
    if w is None:
        return np.linalg.solve(H, rhs)
    support = np.abs(x) > 0
    out = np.zeros_like(x)
    if support.any():
        S = np.flatnonzero(support)
        out[S] = np.linalg.solve(H[np.ix_(S, S)], rhs[S] - w * np.sign(x[S]))
        if np.any(np.sign(out[S]) != np.sign(x[S])):
            return x
    return out


def solve_centralized(costs, r, tol=1e-12, max_iters=200000, history=None):
    """Minimize ``sum_i f_i(x) + g(x)`` by FISTA with function-value restart.

    If `history` is a list, the objective of every accepted iterate is
    appended to it; the sequence is nonincreasing.

    Returns
    -------
    x_star : ndarray
    obj_star : float

    Raises
    ------
    MaxItersReached
        If the prox-gradient fixed-point residual does not reach `tol`.
    """
    costs = list(costs)
    H, rhs = _aggregate(costs)
    const = sum(0.5 * float(c.target @ c.target) for c in costs)
    L = float(np.linalg.eigvalsh(H)[-1])
    step = 1.0 / L
    d = H.shape[0]

    x = np.zeros(d)
    v = x.copy()
    t = 1.0
    obj = _objective(x, H, rhs, const, r)
    res = _fixed_point_residual(x, H, rhs, r, step)
    if history is not None:
        history.append(obj)
    for _ in range(max_iters):
        if res <= tol:
            break
        x_new = r.prox(v - step * (H @ v - rhs), step)
        obj_new = _objective(x_new, H, rhs, const, r)
        if obj_new > obj:
            # restart: drop momentum and take a plain proximal-gradient step from x
            t = 1.0
            x_new = r.prox(x - step * (H @ x - rhs), step)
            obj_new = _objective(x_new, H, rhs, const, r)
            v = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            v = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        x, obj = x_new, obj_new
        res = _fixed_point_residual(x, H, rhs, r, step)
        if res <= 1e3 * tol or res < 1e-9:
            polished = _polish(x, H, rhs, r)
            pres = _fixed_point_residual(polished, H, rhs, r, step)
            pobj = _objective(polished, H, rhs, const, r)
            if pres < res and pobj <= obj:
                x, res, obj = polished, pres, pobj
                v = x.copy()
                t = 1.0
        if history is not None:
            history.append(obj)
    if res > tol:
        raise MaxItersReached(f"FISTA stopped at fixed-point residual {res:.3e} > {tol:.1e}")
    return x, sum(c.value(x) for c in costs) + r.value(x)


def dual_optimal(x_star, costs, graph, regularizer=None, tol=1e-8):
    """Unique dual optimum lying in ``range(B^T)``.

    Solves ``(B B^T) w = -grad F(x*)`` blockwise with the anchored Laplacian
    and returns ``y* = B^T w`` with shape ``(m + 1, d)``.

    Raises
    ------
    OracleError
        If the anchor dual block is not a subgradient of the regularizer at
        `x_star`, which means `x_star` was not accurate enough.
    """
    n = graph.n
    x_stack = np.tile(np.asarray(x_star, dtype=float), (n, 1))
    grad = np.stack([c.gradient(xi) for c, xi in zip(costs, x_stack)])
    w = np.linalg.solve(anchored_laplacian(graph), -grad)
    y = constraint_map(graph, w)
    scale = max(1.0, float(np.linalg.norm(grad)))
    r_a = float(np.linalg.norm(grad + constraint_adjoint(graph, y)))
    if r_a > 1e-9 * scale:
        raise OracleError(f"stationarity residual {r_a:.3e} after dual solve")
    if regularizer is not None:
        margin = regularizer.subgradient_margin(x_star, y[-1], tol)
        if margin > tol * scale:
            raise OracleError(f"anchor dual violates subgradient inclusion by {margin:.3e}")
    return y


def range_projection_residual(graph, y):
    """``||(I - P) y||`` with ``P`` the orthogonal projector onto ``range(B^T)``."""
    w = np.linalg.solve(anchored_laplacian(graph), constraint_adjoint(graph, y))
    return float(np.linalg.norm(y - constraint_map(graph, w)))


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    x_star: np.ndarray
    obj_star: float
    y_star: np.ndarray
    z_star: np.ndarray
    residuals: KKTResiduals
    n: int
    fingerprint: str = ""

    @property
    def x(self):
        """``x*`` repeated for every agent, shape ``(n, d)``."""
        return np.tile(self.x_star, (self.n, 1))

    @property
    def y(self):
        return self.y_star

    def to_dict(self):
        return {
            "fingerprint": self.fingerprint,
            "x_star": self.x_star.tolist(),
            "obj_star": self.obj_star,
            "y_star": self.y_star.tolist(),
            "z_star": self.z_star.tolist(),
            "n": self.n,
            "residuals": {
                "r_a": self.residuals.r_a, "r_b": self.residuals.r_b,
                "r_b_margin": self.residuals.r_b_margin, "r_c": self.residuals.r_c,
            },
        }

    @classmethod
    def from_dict(cls, doc):
        x_star = np.asarray(doc["x_star"], dtype=float)
        return cls(
            x_star, float(doc["obj_star"]), np.asarray(doc["y_star"], dtype=float),
            np.asarray(doc["z_star"], dtype=float), KKTResiduals(**doc["residuals"]),
            int(doc["n"]), doc.get("fingerprint", ""),
        )


def reference_solution(problem, tol=1e-12, cache_dir=None):
    """Full primal-dual reference for `problem`, optionally cached on disk by content hash."""
    fp = problem.fingerprint()
    path = None
    if cache_dir is not None:
        path = os.path.join(cache_dir, f"ref-{fp[:16]}.json")
        if os.path.exists(path):
            with open(path) as fh:
                sol = ReferenceSolution.from_dict(json.load(fh))
            if sol.fingerprint == fp:
                return sol
    x_star, obj_star = solve_centralized(problem.costs, problem.regularizer, tol)
    y_star = dual_optimal(x_star, problem.costs, problem.graph, problem.regularizer)
    x_stack = np.tile(x_star, (problem.n, 1))
    res = kkt_residuals(x_stack, x_star, y_star, problem)
    sol = ReferenceSolution(x_star, float(obj_star), y_star, x_star.copy(), res, problem.n, fp)
    if path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(sol.to_dict(), fh)
    return sol
