"""
Communication topology and the matrices that encode it.

Agents are 0-based. Edge ``k = (i, j)`` always has ``i < j``; the signed
incidence matrix carries ``+1`` at row ``i`` and ``-1`` at row ``j``. The
anchor agent is the single agent whose copy is tied to the nonsmooth
variable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import GraphError

__all__ = [
    "Graph",
    "LaplacianParts",
    "build_random_connected",
    "incidence_matrix",
    "laplacian_parts",
    "lambda_min_anchor",
    "anchored_laplacian",
    "constraint_map",
    "constraint_adjoint",
]


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def _is_connected(n, edges):
    parent = list(range(n))
    components = n
    for i, j in edges:
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph with a designated anchor agent.

    Parameters
    ----------
    n : int
        Number of agents, at least 2.
    edges : sequence of (int, int)
        Edge list. Pairs are normalized to ``i < j`` and sorted.
    anchor : int, optional
        Agent holding the nonsmooth variable.
    """

    n: int
    edges: tuple
    anchor: int = 0

    def __post_init__(self):
        n = int(self.n)
        if n < 2:
            raise GraphError(f"need at least 2 agents, got n={n}")
        normalized = []
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise GraphError(f"self-loop at agent {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            normalized.append((min(i, j), max(i, j)))
        normalized.sort()
        if len(set(normalized)) != len(normalized):
            raise GraphError("duplicate edge")
        if not 0 <= int(self.anchor) < n:
            raise GraphError(f"anchor {self.anchor} out of range for n={n}")
        if not _is_connected(n, normalized):
            raise GraphError("graph is not connected")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", tuple(normalized))
        object.__setattr__(self, "anchor", int(self.anchor))

    @property
    def m(self):
        """Number of edges."""
        return len(self.edges)

    @cached_property
    def neighbors(self):
        """Per-agent neighbor tuples, ascending."""
        nbrs = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(v)) for v in nbrs)

    @cached_property
    def degrees(self):
        deg = np.array([len(v) for v in self.neighbors], dtype=float)
        deg.flags.writeable = False
        return deg

    @cached_property
    def heads(self):
        arr = np.array([e[0] for e in self.edges], dtype=np.intp)
        arr.flags.writeable = False
        return arr

    @cached_property
    def tails(self):
        arr = np.array([e[1] for e in self.edges], dtype=np.intp)
        arr.flags.writeable = False
        return arr

    @cached_property
    def adjacency(self):
        """Sparse 0/1 adjacency in CSR form with sorted column indices."""
        rows = np.concatenate([self.heads, self.tails])
        cols = np.concatenate([self.tails, self.heads])
        adj = sp.csr_matrix(
            (np.ones(2 * self.m), (rows, cols)), shape=(self.n, self.n)
        )
        adj.sort_indices()
        return adj

    def to_dict(self):
        return {"n": self.n, "anchor": self.anchor, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, doc):
        return cls(n=doc["n"], edges=[tuple(e) for e in doc["edges"]], anchor=doc.get("anchor", 0))

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source):
        """Load from a JSON string or a path to a JSON file."""
        try:
            doc = json.loads(source)
        except (json.JSONDecodeError, TypeError):
            with open(source) as fh:
                doc = json.load(fh)
        return cls.from_dict(doc)

    def with_anchor(self, anchor):
        return Graph(self.n, self.edges, anchor)


def build_random_connected(n, p, seed, anchor=0, max_resample=10000):
    """Sample a connected Erdos-Renyi graph.

    Every unordered pair is an edge independently with probability `p`.
    Disconnected samples are discarded and redrawn with ``seed + 1``,
    ``seed + 2``, ... so the result is a pure function of ``(n, p, seed)``.

    Raises
    ------
    GraphError
        On invalid parameters or if `max_resample` draws were all disconnected.
    """
    if n < 2:
        raise GraphError(f"need at least 2 agents, got n={n}")
    if not 0 < p <= 1:
        raise GraphError(f"edge probability must lie in (0, 1], got p={p}")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(max_resample):
        rng = np.random.default_rng(seed + attempt)
        keep = rng.random(iu.size) < p
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        if _is_connected(n, edges):
            return Graph(n, edges, anchor)
    raise GraphError(
        f"no connected sample in {max_resample} draws (n={n}, p={p}, seed={seed}); "
        "increase p or max_resample"
    )


def incidence_matrix(g):
    """Dense signed node-edge incidence matrix of shape ``(n, m)``."""
    inc = np.zeros((g.n, g.m))
    k = np.arange(g.m)
    inc[g.heads, k] = 1.0
    inc[g.tails, k] = -1.0
    return inc


@dataclass(frozen=True)
class LaplacianParts:
    """Degree vector and off-diagonal part of the graph Laplacian."""

    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def laplacian(self):
        return np.diag(self.diag) + self.offdiag


def laplacian_parts(g):
    off = -g.adjacency.toarray()
    return LaplacianParts(diag=np.asarray(g.degrees).copy(), offdiag=off)


def anchored_laplacian(g):
    """``L + e_l e_l^T``; the ``n x n`` factor of ``B B^T``."""
    M = laplacian_parts(g).laplacian
    M[g.anchor, g.anchor] += 1.0
    return M


def lambda_min_anchor(g):
    """Smallest eigenvalue of ``L + e_l e_l^T``.

    This is the smallest positive eigenvalue of ``B^T B``, the constant
    that converts dual distances into primal ones in the rate analysis.
    """
    lam = float(np.linalg.eigvalsh(anchored_laplacian(g))[0])
    if lam <= 1e-10:
        raise GraphError(f"anchored Laplacian is singular (lambda_min={lam:.3e}); graph disconnected?")
    return lam


def constraint_map(g, x):
    """Apply ``B^T`` to stacked primal blocks.

    `x` has shape ``(n, d)``; the result has shape ``(m + 1, d)`` with edge
    differences ``x_i - x_j`` followed by the anchor block.
    """
    out = np.empty((g.m + 1, x.shape[1]))
    np.subtract(x[g.heads], x[g.tails], out=out[:-1])
    out[-1] = x[g.anchor]
    return out


def constraint_adjoint(g, y):
    """Apply ``B`` to stacked dual blocks of shape ``(m + 1, d)``."""
    out = np.zeros((g.n, y.shape[1]))
    np.add.at(out, g.heads, y[:-1])
    np.subtract.at(out, g.tails, y[:-1])
    out[g.anchor] += y[-1]
    return out
