"""
Agent-level execution of DN-ADMM(K) over synchronous message rounds.

Each agent only holds its own cost, its copy ``x_i``, the aggregated dual
``phi_i`` (block ``i`` of ``A y``), and, at the anchor, the extra dual block
and the nonsmooth variable. Agents talk exclusively through per-edge
single-slot mailboxes. A round is: every agent posts, barrier, every agent
consumes. Per outer iteration there are K inner rounds (tag ``U``) and one
iterate exchange (tag ``XNEXT``); the exchanged ``x_{t+1}`` doubles as the
next iteration's ``x_t`` and the zero initial iterate is common knowledge,
so each agent sends ``K + 1`` vectors per neighbor per iteration.
"""

from __future__ import annotations

import csv
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .admm import Hyper, comm_rounds_per_iteration, mean_objective
from .exceptions import NonFiniteError, ProtocolError
from .splitting import diag_block, factor_block

__all__ = [
    "RoundMessage",
    "CommStats",
    "Agent",
    "Mailboxes",
    "DistributedTrace",
    "run_distributed",
    "comm_rounds_per_iteration",
]

TAG_U = "U"
TAG_XNEXT = "XNEXT"


@dataclass(frozen=True)
class RoundMessage:
    sender: int
    receiver: int
    payload: np.ndarray
    tag: str
    iteration: int
    inner: int = -1


class Mailboxes:
    """Per directed edge single-slot buffers."""

    def __init__(self, graph):
        self.graph = graph
        self._slots = {}
        for i, j in graph.edges:
            self._slots[(i, j)] = None
            self._slots[(j, i)] = None
        self._lock = threading.Lock()

    def post(self, msg):
        key = (msg.sender, msg.receiver)
        if key not in self._slots:
            raise ProtocolError(f"agent {msg.sender} is not a neighbor of {msg.receiver}")
        with self._lock:
            if self._slots[key] is not None:
                raise ProtocolError(f"overwriting unread message on edge {key}")
            self._slots[key] = msg

    def collect(self, receiver, tag, iteration, inner=-1):
        """Consume one message from every neighbor, in ascending sender order."""
        out = []
        for j in self.graph.neighbors[receiver]:
            with self._lock:
                msg = self._slots[(j, receiver)]
                self._slots[(j, receiver)] = None
            if msg is None:
                raise ProtocolError(f"agent {receiver} read an empty slot from {j}")
            if (msg.tag, msg.iteration, msg.inner) != (tag, iteration, inner):
                raise ProtocolError(
                    f"agent {receiver} expected {tag}[{iteration},{inner}] from {j}, got "
                    f"{msg.tag}[{msg.iteration},{msg.inner}]"
                )
            if msg.sender not in self.graph.neighbors[receiver]:
                raise ProtocolError(f"payload at {receiver} originated at non-neighbor {msg.sender}")
            out.append((j, msg.payload))
        return out

    def empty(self):
        return all(v is None for v in self._slots.values())


@dataclass
class CommStats:
    """Number of d-vectors each agent has sent, and rounds elapsed."""

    sent: np.ndarray
    rounds: int = 0
    iterations: int = 0

    def to_dict(self):
        return {"sent": self.sent.tolist(), "rounds": self.rounds, "iterations": self.iterations}


class Agent:
    """State and local computations of one agent."""

    def __init__(self, index, cost, graph, regularizer, hyper):
        self.i = index
        self.cost = cost
        self.neighbors = graph.neighbors[index]
        self.degree = float(len(self.neighbors))
        self.is_anchor = index == graph.anchor
        self.reg = regularizer
        self.mu, self.eps, self.K = hyper.mu, hyper.eps, hyper.K
        d = cost.dim
        self.x = np.zeros(d)
        self.phi = np.zeros(d)
        self.nbr_x = {j: np.zeros(d) for j in self.neighbors}
        if self.is_anchor:
            self.y_extra = np.zeros(d)
            self.zhat = np.zeros(d)
        self.sent = 0

    # -- per-iteration phases ------------------------------------------------

    def begin(self):
        mu = self.mu
        x = self.x
        self.hess = self.cost.hessian(x)
        self.factor = factor_block(diag_block(self.hess, self.degree, self.is_anchor, mu, self.eps))
        consensus = np.zeros_like(x)
        for j in self.neighbors:
            consensus += x - self.nbr_x[j]
        h = self.cost.gradient(x) + consensus / mu + self.phi
        if self.is_anchor:
            self.theta_hat = self.reg.prox(x + mu * self.y_extra, mu)
            h = h + (x - self.theta_hat) / mu + self.y_extra
        self.h = h
        self.base = cho_solve(self.factor, h, check_finite=False)
        self.u = self.base

    def post_direction(self, boxes, t, k):
        for j in self.neighbors:
            boxes.post(RoundMessage(self.i, j, self.u, TAG_U, t, k))
        self.sent += len(self.neighbors)

    def inner_update(self, boxes, t, k):
        s = np.zeros_like(self.u)
        for _, uj in boxes.collect(self.i, TAG_U, t, k):
            s += uj
        self.u = self.base + cho_solve(self.factor, (self.degree * self.u + s) / self.mu, check_finite=False)

    def primal_update(self, boxes, t):
        self.x_prev = self.x
        self.x = self.x - self.u
        for j in self.neighbors:
            boxes.post(RoundMessage(self.i, j, self.x, TAG_XNEXT, t))
        self.sent += len(self.neighbors)

    def dual_update(self, boxes, t):
        mu = self.mu
        nbr_prev = self.nbr_x
        self.nbr_x = dict(boxes.collect(self.i, TAG_XNEXT, t))
        consensus = np.zeros_like(self.x)
        for j in self.neighbors:
            consensus += self.x - self.nbr_x[j]
        self.phi = self.phi + consensus / mu
        if self.is_anchor:
            y_old = self.y_extra
            self.zhat = self.reg.prox(self.x + mu * y_old, mu)
            self.y_extra = y_old + (self.x - self.zhat) / mu
        self.e_block = self._error_block(nbr_prev)

    def _error_block(self, nbr_prev):
        """Local block of the inexactness e_t, from own and neighbor increments."""
        mu = self.mu
        dx = self.x - self.x_prev
        taylor = self.cost.gradient(self.x_prev) + self.hess @ dx - self.cost.gradient(self.x)
        lap = np.zeros_like(dx)
        for j in self.neighbors:
            lap += dx - (self.nbr_x[j] - nbr_prev[j])
        H_dx = self.hess @ dx + lap / mu + self.eps * dx
        if self.is_anchor:
            H_dx = H_dx + dx / mu
        e = taylor - self.h - H_dx
        if self.is_anchor:
            e = e + (self.zhat - self.theta_hat) / mu
        return e

    def finite(self):
        ok = np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.phi))
        if self.is_anchor:
            ok = ok and np.all(np.isfinite(self.y_extra)) and np.all(np.isfinite(self.zhat))
        return bool(ok)


@dataclass
class DistributedTrace:
    """Snapshots of the network state, index 0 being the zero initialization."""

    x: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    zhat: list = field(default_factory=list)
    y_extra: list = field(default_factory=list)
    e_norm: list = field(default_factory=list)
    K: int = 0

    def stacked(self):
        return np.stack(self.x)

    def per_agent_csv(self, path):
        """One row per (iteration, agent) with the agent's iterate."""
        d = self.x[0].shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "agent"] + [f"x{k}" for k in range(d)])
            for t, xt in enumerate(self.x):
                for i, xi in enumerate(xt):
                    w.writerow([t, i] + [repr(float(v)) for v in xi])

    def residuals(self, problem, t):
        """Stationarity ``r_a`` and feasibility ``r_c`` of snapshot `t`, observed globally."""
        g = problem.graph
        x, zhat = self.x[t], self.zhat[t]
        diffs = x[g.heads] - x[g.tails]
        r_c = float(np.sqrt(np.sum(diffs ** 2) + np.sum((x[g.anchor] - zhat) ** 2)))
        stat = problem.grad_F(x) + self.phi[t]
        stat[g.anchor] += self.y_extra[t]
        return float(np.linalg.norm(stat)), r_c

    def metrics(self, problem, star=None):
        """Per-iteration relative cost, KKT residuals and e-norm.

        Row 0 is the zero initialization; its ``rel_cost`` is 1 and its
        ``e_norm`` is NaN since no step has been taken.
        """
        obj0 = mean_objective(problem, self.x[0])
        rows = []
        for t in range(len(self.x)):
            r_a, r_c = self.residuals(problem, t)
            obj = mean_objective(problem, self.x[t])
            rel = float("nan")
            if star is not None:
                denom = obj0 - star.obj_star
                rel = (obj - star.obj_star) / denom if denom != 0 else 0.0
            rows.append({
                "iter": t,
                "comm_rounds_cum": t * comm_rounds_per_iteration(self.K),
                "rel_cost": rel,
                "obj_mean": obj,
                "e_norm": self.e_norm[t - 1] if t else float("nan"),
                "r_a": r_a,
                "r_c": r_c,
            })
        return rows


def _snapshot(trace, agents, anchor):
    trace.x.append(np.stack([a.x for a in agents]))
    trace.phi.append(np.stack([a.phi for a in agents]))
    trace.zhat.append(agents[anchor].zhat.copy())
    trace.y_extra.append(agents[anchor].y_extra.copy())


def run_distributed(problem, hyper, rounds=None, parallel=False, workers=None, stop=None):
    """Simulate `rounds` outer iterations of the agent-level algorithm.

    Parameters
    ----------
    problem : Problem
    hyper : Hyper
    rounds : int, optional
        Outer iterations; defaults to ``hyper.max_iters``.
    parallel : bool
        Run each phase on a thread pool (one task per agent). Phases are
        separated by barriers, so the result is identical to serial runs.

    Returns
    -------
    (DistributedTrace, CommStats)
    """
    if not isinstance(hyper, Hyper):
        raise TypeError("hyper must be a Hyper")
    g = problem.graph
    T = hyper.max_iters if rounds is None else int(rounds)
    agents = [Agent(i, c, g, problem.regularizer, hyper) for i, c in enumerate(problem.costs)]
    boxes = Mailboxes(g)
    stats = CommStats(sent=np.zeros(g.n, dtype=int))
    trace = DistributedTrace(K=hyper.K)
    _snapshot(trace, agents, g.anchor)

    pool = ThreadPoolExecutor(max_workers=workers) if parallel else None

    def phase(fn):
        if pool is None:
            for a in agents:
                fn(a)
        else:
            list(pool.map(fn, agents))

    try:
        for t in range(T):
            phase(Agent.begin)
            for k in range(hyper.K):
                phase(lambda a: a.post_direction(boxes, t, k))
                phase(lambda a: a.inner_update(boxes, t, k))
                stats.rounds += 1
            phase(lambda a: a.primal_update(boxes, t))
            phase(lambda a: a.dual_update(boxes, t))
            stats.rounds += 1
            stats.iterations += 1
            if not boxes.empty():
                raise ProtocolError(f"undelivered messages after iteration {t}")
            if not all(a.finite() for a in agents):
                raise NonFiniteError(f"non-finite agent state at iteration {t + 1}", iteration=t + 1)
            _snapshot(trace, agents, g.anchor)
            trace.e_norm.append(float(np.sqrt(sum(np.sum(a.e_block ** 2) for a in agents))))
            if stop is not None and stop(trace):
                break
    finally:
        if pool is not None:
            pool.shutdown()
    stats.sent = np.array([a.sent for a in agents])
    return trace, stats
