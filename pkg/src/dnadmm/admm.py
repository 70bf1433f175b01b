"""
Global-form DN-ADMM(K) iteration, its rate constants and per-iteration
diagnostics.

Stacked arrays use shape ``(n, d)`` for primal blocks and ``(m + 1, d)``
for dual blocks; flattening in C order gives the usual Kronecker layout.
The auxiliary ``theta`` and ``z`` vectors are stored as their only nonzero
(anchor) block.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyZetaInterval, NonFiniteError
from .graph import constraint_adjoint, constraint_map, lambda_min_anchor
from .splitting import (
    CouplingApplier,
    build_diag_blocks,
    dense_approx_inverse,
    dense_coupling,
    dense_hessian,
    gamma_bound,
    newton_direction,
)

__all__ = [
    "Hyper",
    "GlobalState",
    "StepInfo",
    "TheoryParams",
    "TraceRecord",
    "IterationTrace",
    "lagrangian_gradient",
    "admm_step",
    "step_with_info",
    "run",
    "error_term",
    "theory_params",
    "theory_eps_lower_bound",
    "optimize_theory_params",
    "theory_for",
    "lyapunov",
    "comm_rounds_per_iteration",
]


@dataclass(frozen=True)
class Hyper:
    """Algorithm hyperparameters.

    ``tol`` is the stopping tolerance on the KKT residuals. A non-finite
    ``tol`` disables early stopping so exactly ``max_iters`` steps run.
    """

    mu: float = 1.0
    eps: float = 1.0
    K: int = 2
    max_iters: int = 1000
    tol: float = 1e-8

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError("K must be a nonnegative integer")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass(frozen=True, eq=False)
class GlobalState:
    x: np.ndarray
    y: np.ndarray
    zhat: np.ndarray
    iter: int = 0

    @classmethod
    def zeros(cls, problem):
        n, m, d = problem.n, problem.graph.m, problem.d
        return cls(np.zeros((n, d)), np.zeros((m + 1, d)), np.zeros(d), 0)

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.zhat))
        )


@dataclass(frozen=True, eq=False)
class StepInfo:
    """Intermediates of one step, kept for diagnostics."""

    theta_hat: np.ndarray
    grad: np.ndarray
    direction: np.ndarray
    diag: object


def comm_rounds_per_iteration(K):
    """Neighbor broadcasts per agent per outer iteration: K inner rounds plus the iterate exchange."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    return int(K) + 1


def lagrangian_gradient(problem, x, y, theta_hat, mu):
    """``grad F(x) + (1/mu) B (B^T x - theta) + B y``."""
    g = problem.graph
    resid = constraint_map(g, x)
    resid[-1] -= theta_hat
    return problem.grad_F(x) + constraint_adjoint(g, resid) / mu + constraint_adjoint(g, y)


def step_with_info(state, problem, hyper, coupling=None):
    """One DN-ADMM(K) step; returns the new state and its intermediates."""
    g, r = problem.graph, problem.regularizer
    mu = hyper.mu
    x, y = state.x, state.y
    if x.shape != (problem.n, problem.d) or y.shape != (g.m + 1, problem.d):
        raise ValueError("state dimensions do not match the problem")
    cpl = coupling if coupling is not None else CouplingApplier(g, mu)

    y_anchor = y[-1]
    theta_hat = r.prox(x[g.anchor] + mu * y_anchor, mu)
    h = lagrangian_gradient(problem, x, y, theta_hat, mu)
    D = build_diag_blocks(problem.costs, x, g, mu, hyper.eps)
    u = newton_direction(hyper.K, D, cpl, h)
    x_next = x - u
    zhat_next = r.prox(x_next[g.anchor] + mu * y_anchor, mu)
    resid = constraint_map(g, x_next)
    resid[-1] -= zhat_next
    y_next = y + resid / mu

    new = GlobalState(x_next, y_next, zhat_next, state.iter + 1)
    if not new.is_finite():
        raise NonFiniteError(f"non-finite iterate at iteration {new.iter}", iteration=new.iter)
    return new, StepInfo(theta_hat, h, u, D)


def admm_step(state, problem, hyper, coupling=None):
    return step_with_info(state, problem, hyper, coupling)[0]


def error_term(x_t, x_next, theta_hat, zhat_next, problem, hyper, grad=None):
    """Inexactness ``e_t`` of the approximate Newton step.

    With `grad` (the Lagrangian gradient the step actually used) the
    approximate-Hessian product is formed matrix-free through
    ``Hhat (x_next - x_t) = -grad``. Without it, ``Hhat`` is assembled
    densely from the truncated series, independent of the step.
    """
    g = problem.graph
    mu, eps = hyper.mu, hyper.eps
    dx = x_next - x_t
    taylor = problem.grad_F(x_t) + problem.hess_F_apply(x_t, dx) - problem.grad_F(x_next)

    if grad is not None:
        H_dx = problem.hess_F_apply(x_t, dx) + constraint_adjoint(g, constraint_map(g, dx)) / mu + eps * dx
        split = -grad - H_dx
    else:
        n, d = problem.n, problem.d
        D = build_diag_blocks(problem.costs, x_t, g, mu, eps).dense()
        N = dense_coupling(g, mu, d)
        Hhat = np.linalg.inv(dense_approx_inverse(hyper.K, D, N))
        H = dense_hessian(problem, mu, eps, x_t)
        split = ((Hhat - H) @ dx.reshape(-1)).reshape(n, -1)

    prox_gap = np.zeros_like(x_t)
    prox_gap[g.anchor] = (zhat_next - theta_hat) / mu
    return taylor + split + prox_gap


def lyapunov(state, star, mu, eps):
    """``eps ||x - x*||^2 + mu ||y - y*||^2``."""
    dx = np.asarray(state.x) - np.asarray(star.x)
    dy = np.asarray(state.y) - np.asarray(star.y)
    return float(eps * np.sum(dx * dx) + mu * np.sum(dy * dy))


# ---------------------------------------------------------------------------
# rate constants

@dataclass(frozen=True)
class TheoryParams:
    beta: float
    eta: float
    zeta: float
    gamma: float
    delta: float
    lambda_min: float
    eps: float
    eps_theory: float
    zeta_interval: tuple

    @property
    def certified(self):
        """True when ``eps`` exceeds the rate theorem's lower bound."""
        return self.eps > self.eps_theory

    @property
    def rate(self):
        return 1.0 / (1.0 + self.delta)


def theory_eps_lower_bound(m_f, M_f, n, mu):
    return (2.0 * M_f + (m_f + 2.0 * M_f * (n - 1)) / (mu * m_f)) ** 2 * (m_f + M_f) / (2.0 * m_f * M_f)


def _delta(m_f, M_f, mu, eps, gamma, lam, beta, eta, zeta):
    t1 = 2.0 * m_f * M_f / (eps * (m_f + M_f)) - 1.0 / (eps * zeta)
    t2 = (eps - zeta * gamma ** 2) * lam * (beta - 1.0) * (eta - 1.0) / (
        mu * beta * (eps ** 2 * (eta - 1.0) + eta * gamma ** 2 * (beta - 1.0))
    )
    t3 = 2.0 * lam / ((m_f + M_f) * mu * beta * eta)
    return min(t1, t2, t3)


def theory_params(m_f, M_f, n, mu, K, lambda_min, eps, beta=2.0, eta=2.0, zeta_frac=0.5):
    """Constants of the linear-rate certificate.

    Parameters
    ----------
    m_f, M_f : float
        Uniform curvature bounds of the local costs.
    n : int
        Number of agents.
    mu, eps : float
        Penalty and proximal damping actually used.
    K : int
        Truncation order.
    lambda_min : float
        Smallest positive eigenvalue of ``B^T B``.
    beta, eta : float
        Free constants, both greater than one.
    zeta_frac : float
        Position of ``zeta`` inside its open admissible interval.

    Raises
    ------
    EmptyZetaInterval
        If ``eps / gamma^2`` does not exceed ``(m_f + M_f) / (2 m_f M_f)``.
    """
    if not (beta > 1 and eta > 1):
        raise ValueError("beta and eta must exceed 1")
    if not 0 < zeta_frac < 1:
        raise ValueError("zeta_frac must lie in (0, 1)")
    if not (0 < m_f <= M_f):
        raise ValueError("need 0 < m_f <= M_f")
    if not lambda_min > 0:
        raise ValueError("lambda_min must be positive")
    gamma = gamma_bound(n, mu, m_f, M_f, eps, K)
    lo = (m_f + M_f) / (2.0 * m_f * M_f)
    hi = eps / gamma ** 2
    if hi <= lo:
        raise EmptyZetaInterval(
            f"eps/gamma^2 = {hi:.6g} <= (m_f+M_f)/(2 m_f M_f) = {lo:.6g}; increase eps"
        )
    zeta = lo + zeta_frac * (hi - lo)
    delta = _delta(m_f, M_f, mu, eps, gamma, lambda_min, beta, eta, zeta)
    assert delta > 0, "delta must be positive inside the zeta interval"
    return TheoryParams(
        beta=float(beta), eta=float(eta), zeta=float(zeta), gamma=float(gamma), delta=float(delta),
        lambda_min=float(lambda_min), eps=float(eps),
        eps_theory=float(theory_eps_lower_bound(m_f, M_f, n, mu)), zeta_interval=(lo, hi),
    )


def optimize_theory_params(m_f, M_f, n, mu, K, lambda_min, eps, grid=10):
    """Coarse grid search over ``(beta, eta, zeta_frac)`` maximizing delta."""
    bs = np.linspace(1.0, 10.0, grid + 1)[1:]
    fracs = (np.arange(grid) + 0.5) / grid
    best = None
    for beta, eta, frac in itertools.product(bs, bs, fracs):
        tp = theory_params(m_f, M_f, n, mu, K, lambda_min, eps, beta, eta, frac)
        if best is None or tp.delta > best.delta:
            best = tp
    return best


def theory_for(problem, hyper, **kwargs):
    b = problem.bounds
    return theory_params(
        b.m_f, b.M_f, problem.n, hyper.mu, hyper.K, lambda_min_anchor(problem.graph), hyper.eps, **kwargs
    )


# ---------------------------------------------------------------------------
# driver

@dataclass
class TraceRecord:
    iter: int
    comm_rounds_cum: int
    rel_cost: float
    obj_mean: float
    e_norm: float
    gamma_dx: float
    lyapunov: float
    contraction: float
    r_a: float
    r_b: bool
    r_b_margin: float
    r_c: float
    zhat_fixed_point: float


CSV_COLUMNS = ("iter", "comm_rounds_cum", "rel_cost", "e_norm", "gamma_dx", "r_a", "r_c")


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    final_state: GlobalState | None = None
    gamma: float = float("nan")

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def iterations_to(self, name, threshold):
        """First iteration at which column `name` is ``<= threshold`` (None if never)."""
        for r in self.records:
            if getattr(r, name) <= threshold:
                return r.iter
        return None

    def to_csv(self, path=None, columns=CSV_COLUMNS):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in self.records:
            w.writerow([_fmt(getattr(r, c)) for c in columns])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


def mean_objective(problem, x):
    return float(np.mean([problem.objective(xi) for xi in x]))


def run(problem, hyper, star=None, coupling=None, state=None):
    """Iterate DN-ADMM(K) from zero until the KKT residuals drop below ``hyper.tol``.

    Parameters
    ----------
    star : ReferenceSolution, optional
        Enables the relative-cost and Lyapunov columns.

    Returns
    -------
    IterationTrace
        ``converged`` is False when ``max_iters`` was exhausted.
    """
    from .reference import kkt_residuals

    state = GlobalState.zeros(problem) if state is None else state
    b = problem.bounds
    gamma = gamma_bound(problem.n, hyper.mu, b.m_f, b.M_f, hyper.eps, hyper.K)
    trace = IterationTrace(gamma=gamma)
    per_iter = comm_rounds_per_iteration(hyper.K)

    obj0 = mean_objective(problem, state.x)
    if star is not None:
        denom = obj0 - star.obj_star
        v_prev = lyapunov(state, star, hyper.mu, hyper.eps)
    check_tol = math.isfinite(hyper.tol)

    for _ in range(hyper.max_iters):
        new, info = step_with_info(state, problem, hyper, coupling)
        e = error_term(state.x, new.x, info.theta_hat, new.zhat, problem, hyper, grad=info.grad)
        dx = np.linalg.norm(new.x - state.x)
        kkt = kkt_residuals(new.x, new.zhat, new.y, problem)
        fp = float(np.linalg.norm(new.zhat - problem.regularizer.prox(new.zhat + hyper.mu * new.y[-1], hyper.mu)))
        obj = mean_objective(problem, new.x)
        if star is not None:
            rel = (obj - star.obj_star) / denom if denom != 0 else 0.0
            v = lyapunov(new, star, hyper.mu, hyper.eps)
            ratio = v / v_prev if v_prev > 0 else 0.0
            v_prev = v
        else:
            rel = v = ratio = float("nan")
        trace.records.append(TraceRecord(
            iter=new.iter, comm_rounds_cum=new.iter * per_iter, rel_cost=rel, obj_mean=obj,
            e_norm=float(np.linalg.norm(e)), gamma_dx=gamma * dx, lyapunov=v, contraction=ratio,
            r_a=kkt.r_a, r_b=kkt.r_b, r_b_margin=kkt.r_b_margin, r_c=kkt.r_c, zhat_fixed_point=fp,
        ))
        state = new
        if check_tol and max(kkt.r_a, kkt.r_c, fp) < hyper.tol:
            trace.converged = True
            break
    trace.final_state = state
    return trace
