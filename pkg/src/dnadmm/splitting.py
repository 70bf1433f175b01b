"""
Block splitting of the augmented-Lagrangian Hessian and the truncated
Neumann-series Newton direction.

The Hessian ``H = Hess F + (1/mu) B B^T + eps I`` splits as ``H = D - N``
with ``D`` block diagonal (agent-local) and

    N = (1/mu) (L_dia - L_off) kron I_d,

which only couples graph neighbors. The K-term direction is obtained by K
applications of ``N``, i.e. K neighbor exchanges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .graph import anchored_laplacian, laplacian_parts

__all__ = [
    "DiagBlocks",
    "CouplingApplier",
    "build_diag_blocks",
    "apply_coupling",
    "newton_direction",
    "dense_coupling",
    "dense_hessian",
    "dense_approx_inverse",
    "spectral_radius_bound",
    "gamma_bound",
    "DENSE_SIZE_CAP",
]

DENSE_SIZE_CAP = 400


@dataclass(frozen=True, eq=False)
class DiagBlocks:
    """Per-agent diagonal blocks ``D_ii`` with their Cholesky factors."""

    blocks: np.ndarray
    factors: tuple

    @property
    def n(self):
        return self.blocks.shape[0]

    @property
    def d(self):
        return self.blocks.shape[1]

    def solve_block(self, i, v):
        return cho_solve(self.factors[i], v, check_finite=False)

    def solve(self, h):
        """``D^{-1} h`` for stacked ``h`` of shape ``(n, d)``."""
        # non-finite input propagates so the caller's divergence guard reports it
        return np.stack([cho_solve(f, hi, check_finite=False) for f, hi in zip(self.factors, h)])

    def dense(self):
        n, d = self.n, self.d
        out = np.zeros((n * d, n * d))
        for i in range(n):
            out[i * d:(i + 1) * d, i * d:(i + 1) * d] = self.blocks[i]
        return out


def diag_block(hess_i, degree, is_anchor, mu, eps):
    """One agent's block ``Hess f_i + (1/mu)([i = l] + 2 deg_i) I + eps I``."""
    d = hess_i.shape[0]
    shift = (float(is_anchor) + 2.0 * degree) / mu + eps
    return hess_i + shift * np.eye(d)


def factor_block(block):
    try:
        return cho_factor(block, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - excluded by construction
        raise AssertionError("diagonal block is not positive definite") from exc


def build_diag_blocks(costs, x, g, mu, eps):
    """Assemble and factor every ``D_ii`` at the stacked point `x`."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = np.asarray(x, dtype=float).reshape(g.n, -1)
    blocks = np.stack([
        diag_block(c.hessian(xi), g.degrees[i], i == g.anchor, mu, eps)
        for i, (c, xi) in enumerate(zip(costs, x))
    ])
    return DiagBlocks(blocks, tuple(factor_block(b) for b in blocks))


@dataclass(frozen=True, eq=False)
class CouplingApplier:
    """Matrix-free ``N``: block ``i`` of ``N u`` is ``(deg_i u_i + sum_{j~i} u_j) / mu``."""

    graph: object
    mu: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        g = self.graph
        # CSR rows have sorted column indices, so neighbor sums accumulate in ascending id order.
        return (g.degrees[:, None] * u + g.adjacency @ u) / self.mu


def apply_coupling(cpl, u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        if u.size % cpl.graph.n:
            raise ValueError(f"vector of length {u.size} is not n*d for n={cpl.graph.n}")
        return cpl(u.reshape(cpl.graph.n, -1)).reshape(-1)
    if u.shape[0] != cpl.graph.n:
        raise ValueError(f"expected {cpl.graph.n} blocks, got {u.shape[0]}")
    return cpl(u)


def newton_direction(K, D, cpl, h):
    """Truncated-series direction ``u(K)``.

    ``u(0) = D^{-1} h`` and ``u(k+1) = D^{-1} h + D^{-1} N u(k)``. Uses
    exactly `K` coupling applications.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    base = D.solve(h)
    u = base
    for _ in range(K):
        u = base + D.solve(cpl(u))
    return u


def dense_coupling(g, mu, d):
    parts = laplacian_parts(g)
    return np.kron((np.diag(parts.diag) - parts.offdiag) / mu, np.eye(d))


def dense_hessian(problem, mu, eps, x=None):
    """Dense ``Hess F + (1/mu) B B^T + eps I``."""
    n, d = problem.n, problem.d
    _cap(n * d)
    H = np.kron(anchored_laplacian(problem.graph) / mu, np.eye(d))
    for i, c in enumerate(problem.costs):
        H[i * d:(i + 1) * d, i * d:(i + 1) * d] += c.hessian(None if x is None else x[i])
    H[np.diag_indices_from(H)] += eps
    return H


def _cap(size):
    if size > DENSE_SIZE_CAP:
        raise ValueError(f"dense oracle limited to {DENSE_SIZE_CAP} unknowns, got {size}")


def _inv_sqrt_spd(M):
    w, V = np.linalg.eigh(M)
    return (V / np.sqrt(w)) @ V.T


def dense_approx_inverse(K, D, N):
    """``D^{-1/2} sum_{i=0}^{K} (D^{-1/2} N D^{-1/2})^i D^{-1/2}``, densely."""
    D = np.asarray(D, dtype=float)
    _cap(D.shape[0])
    Dm = _inv_sqrt_spd(D)
    S = Dm @ N @ Dm
    term = np.eye(D.shape[0])
    total = term.copy()
    for _ in range(K):
        term = term @ S
        total += term
    out = Dm @ total @ Dm
    return 0.5 * (out + out.T)


def _check_theory_args(n, mu, m_f, eps):
    if n < 2:
        raise ValueError("n must be at least 2")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if eps < 0 or not m_f + eps > 0 or m_f < 0:
        raise ValueError("need m_f >= 0, eps >= 0 and m_f + eps > 0")


def spectral_radius_bound(n, mu, m_f, eps):
    """Gershgorin-type bound ``2(n-1) / (mu (m_f + eps) + 2(n-1))``."""
    _check_theory_args(n, mu, m_f, eps)
    if np.isinf(mu):
        return 0.0
    return 2.0 * (n - 1) / (mu * (m_f + eps) + 2.0 * (n - 1))


def gamma_bound(n, mu, m_f, M_f, eps, K):
    """Constant ``gamma`` with ``||e_t|| <= gamma ||x_{t+1} - x_t||``."""
    _check_theory_args(n, mu, m_f, eps)
    if M_f < m_f:
        raise ValueError("need M_f >= m_f")
    ratio = spectral_radius_bound(n, mu, m_f, eps)
    return 2.0 * M_f + 1.0 / mu + (M_f + eps + (1.0 + 2.0 * (n - 1)) / mu) * ratio ** (K + 1)
