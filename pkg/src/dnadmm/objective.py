"""
Smooth local costs, the regularizer and its proximal machinery.

Local costs are least-squares terms with an optional ridge,

    f_i(x) = 0.5 * ||A_i x - b_i||^2 + 0.5 * rho * ||x||^2,

and the regularizer is either zero or a weighted l1 norm.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DegenerateCurvature
from .graph import Graph

__all__ = [
    "QuadraticCost",
    "SmoothBounds",
    "Regularizer",
    "Zero",
    "L1",
    "Problem",
    "local_gradient",
    "smooth_bounds",
    "prox_apply",
    "moreau_envelope",
    "subgradient_contains",
    "subgradient_margin",
    "global_cost",
]


def _check_dim(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"expected a vector of length {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """One agent's private least-squares cost.

    Parameters
    ----------
    design : ndarray, shape (p, d)
    target : ndarray, shape (p,)
    ridge : float, optional
        Tikhonov weight ``rho >= 0``.
    """

    design: np.ndarray
    target: np.ndarray
    ridge: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.design, dtype=float))
        b = np.asarray(self.target, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"design has {A.shape[0]} rows but target has {b.shape[0]}")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite data in cost")
        object.__setattr__(self, "design", A)
        object.__setattr__(self, "target", b)
        object.__setattr__(self, "ridge", float(self.ridge))

    @property
    def dim(self):
        return self.design.shape[1]

    @cached_property
    def hessian_matrix(self):
        H = self.design.T @ self.design
        H[np.diag_indices_from(H)] += self.ridge
        return H

    @cached_property
    def _atb(self):
        return self.design.T @ self.target

    def value(self, x):
        x = _check_dim(x, self.dim)
        r = self.design @ x - self.target
        return 0.5 * float(r @ r) + 0.5 * self.ridge * float(x @ x)

    def gradient(self, x):
        x = _check_dim(x, self.dim)
        return self.design.T @ (self.design @ x - self.target) + self.ridge * x

    def hessian(self, x=None):
        """Hessian at `x`; constant for this family."""
        return self.hessian_matrix

    def minimizer(self):
        return np.linalg.solve(self.hessian_matrix, self._atb)

    def shifted(self, constant):
        """Same cost plus a scalar constant (appends a row with zero design)."""
        A = np.vstack([self.design, np.zeros((1, self.dim))])
        b = np.append(self.target, np.sqrt(2.0 * constant))
        return QuadraticCost(A, b, self.ridge)

    def to_shard(self, agent):
        """Serialize as ``{agent, rows: [[a_1..a_d, b], ...], ridge}``."""
        rows = np.column_stack([self.design, self.target]).tolist()
        return {"agent": int(agent), "rows": rows, "ridge": self.ridge}

    @classmethod
    def from_shard(cls, doc):
        rows = np.asarray(doc["rows"], dtype=float)
        if rows.ndim != 2 or rows.shape[1] < 2:
            raise ValueError("shard rows must be [[a_1..a_d, b], ...] with d >= 1")
        return cls(rows[:, :-1], rows[:, -1], doc.get("ridge", 0.0))


def local_gradient(c, x):
    return c.gradient(x)


@dataclass(frozen=True)
class SmoothBounds:
    """Uniform curvature bounds ``m_f I <= Hess f_i <= M_f I``."""

    m_f: float
    M_f: float


def smooth_bounds(costs):
    """Tightest uniform bounds on every local Hessian.

    Raises
    ------
    DegenerateCurvature
        If some local Hessian is (numerically) singular.
    """
    costs = list(costs)
    if not costs:
        raise ValueError("need at least one cost")
    lo, hi = np.inf, -np.inf
    for c in costs:
        ev = np.linalg.eigvalsh(c.hessian_matrix)
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    if lo <= 1e-12:
        raise DegenerateCurvature(
            f"smallest local Hessian eigenvalue is {lo:.3e}; add a ridge term (rho > 0)"
        )
    return SmoothBounds(float(lo), float(hi))


class Regularizer(ABC):
    """Proper closed convex function with a cheap proximal operator."""

    @abstractmethod
    def value(self, v): ...

    @abstractmethod
    def prox(self, v, mu): ...

    @abstractmethod
    def subgradient_margin(self, z, y, tol):
        """Worst per-coordinate violation of ``y in dg(z)``; ``<= tol`` means member."""

    def contains(self, z, y, tol):
        return self.subgradient_margin(z, y, tol) <= tol

    @abstractmethod
    def to_dict(self): ...

    @staticmethod
    def from_dict(doc):
        kind = doc["kind"]
        if kind == "zero":
            return Zero()
        if kind == "l1":
            return L1(doc["weight"])
        raise ValueError(f"unknown regularizer kind {kind!r}")


@dataclass(frozen=True)
class Zero(Regularizer):
    def value(self, v):
        return 0.0

    def prox(self, v, mu):
        return np.array(v, dtype=float, copy=True)

    def subgradient_margin(self, z, y, tol):
        y = np.asarray(y, dtype=float)
        return float(np.max(np.abs(y))) if y.size else 0.0

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class L1(Regularizer):
    """``weight * ||v||_1``."""

    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("l1 weight must be positive")

    def value(self, v):
        return self.weight * float(np.sum(np.abs(v)))

    def prox(self, v, mu):
        v = np.asarray(v, dtype=float)
        return np.sign(v) * np.maximum(np.abs(v) - mu * self.weight, 0.0)

    def subgradient_margin(self, z, y, tol):
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float)
        active = np.abs(z) > tol
        viol = np.where(
            active,
            np.abs(y - self.weight * np.sign(z)),
            np.maximum(np.abs(y) - self.weight, 0.0),
        )
        return float(np.max(viol)) if viol.size else 0.0

    def to_dict(self):
        return {"kind": "l1", "weight": self.weight}


def _check_mu(mu):
    if not mu > 0:
        raise ValueError(f"prox parameter must be positive, got {mu}")


def prox_apply(r, v, mu):
    _check_mu(mu)
    return r.prox(np.asarray(v, dtype=float), mu)


def moreau_envelope(r, v, mu):
    _check_mu(mu)
    v = np.asarray(v, dtype=float)
    p = r.prox(v, mu)
    return r.value(p) + float(np.sum((v - p) ** 2)) / (2.0 * mu)


def subgradient_contains(r, z, y, tol):
    return r.contains(z, y, tol)


def subgradient_margin(r, z, y, tol):
    return r.subgradient_margin(z, y, tol)


def global_cost(costs, r, x):
    """``sum_i f_i(x) + g(x)`` at a single shared point."""
    x = np.asarray(x, dtype=float)
    return sum(c.value(x) for c in costs) + r.value(x)


@dataclass(frozen=True, eq=False)
class Problem:
    """Decentralized composite problem: graph, local costs, regularizer."""

    graph: Graph
    costs: tuple
    regularizer: Regularizer = field(default_factory=Zero)

    def __post_init__(self):
        costs = tuple(self.costs)
        if len(costs) != self.graph.n:
            raise ValueError(f"{len(costs)} costs for {self.graph.n} agents")
        dims = {c.dim for c in costs}
        if len(dims) != 1:
            raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
        object.__setattr__(self, "costs", costs)

    @property
    def n(self):
        return self.graph.n

    @property
    def d(self):
        return self.costs[0].dim

    @cached_property
    def bounds(self):
        return smooth_bounds(self.costs)

    @cached_property
    def hessian_blocks(self):
        """Stacked local Hessians, shape ``(n, d, d)``."""
        return np.stack([c.hessian_matrix for c in self.costs])

    def grad_F(self, x):
        """Gradient of ``F(x) = sum_i f_i(x_i)`` for stacked ``x`` of shape ``(n, d)``."""
        return np.stack([c.gradient(xi) for c, xi in zip(self.costs, x)])

    def hess_F_apply(self, x, u):
        return np.einsum("ijk,ik->ij", self.hessian_blocks, u)

    def F(self, x):
        return sum(c.value(xi) for c, xi in zip(self.costs, x))

    def objective(self, xhat):
        return global_cost(self.costs, self.regularizer, xhat)

    def with_graph(self, graph):
        return Problem(graph, self.costs, self.regularizer)

    def fingerprint(self):
        """Stable content hash used to key cached reference solutions."""
        h = hashlib.sha256()
        h.update(json.dumps(self.graph.to_dict(), sort_keys=True).encode())
        h.update(json.dumps(self.regularizer.to_dict(), sort_keys=True).encode())
        for c in self.costs:
            h.update(np.ascontiguousarray(c.design).tobytes())
            h.update(np.ascontiguousarray(c.target).tobytes())
            h.update(repr(c.ridge).encode())
        return h.hexdigest()
