"""
Truncated Neumann series for the Newton direction
=================================================

The primal Hessian splits into a block diagonal part D, which every agent
can invert locally, and a neighbor coupling N. Keeping K + 1 terms of the
series sum_k (D^-1 N)^k D^-1 gives a direction that needs K rounds of
neighbor exchange. Here we watch the direction error decay with K.
"""

import numpy as np

from dnadmm.admm import GlobalState, Hyper, lagrangian_gradient
from dnadmm.instances import random_problem
from dnadmm.splitting import (build_diag_blocks, CouplingApplier, dense_hessian,
                              newton_direction, spectral_radius_bound)

problem = random_problem(8, 3, seed=0, m_f=1.0, M_f=2.0)
mu, eps = 1.0, 1.0

# %%
# The exact direction solves H d = -grad at the starting point.
state = GlobalState.zeros(problem)
g = lagrangian_gradient(problem, state.x, state.y, state.zhat, mu)
H = dense_hessian(problem, mu, eps)
exact = -np.linalg.solve(H, g.ravel())

D = build_diag_blocks(problem.costs, state.x, problem.graph, mu, eps)
cpl = CouplingApplier(problem.graph, mu)

errs = []
for K in range(9):
    approx = newton_direction(K, D, cpl, -g).ravel()
    errs.append(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
    print(f"K={K}  relative direction error {errs[-1]:.3e}")

# %%
# The error shrinks roughly geometrically; the rate is bounded by the
# spectral radius of D^-1 N.
rho = spectral_radius_bound(problem.n, mu, problem.bounds.m_f, eps)
print(f"spectral radius bound: {rho:.4f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    plt.semilogy(range(len(errs)), errs, "o-", label="measured")
    plt.semilogy(range(len(errs)), errs[0] * rho ** np.arange(len(errs)), "--", label="rho^K")
    plt.xlabel("K")
    plt.ylabel("relative direction error")
    plt.legend()
    plt.savefig("splitting.png", dpi=100)
