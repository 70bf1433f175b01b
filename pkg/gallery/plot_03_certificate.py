"""
Numerical convergence certificate
=================================

With eps above the theoretical threshold, the linear rate comes with a
chain of inequalities: the error term bound, the Lyapunov decrease and the
contraction factor. ``certify`` evaluates each one along a run and reports
the worst slack. In the practical regime (small eps) the contraction check
is reported but not binding.
"""

from dnadmm import Hyper, certify
from dnadmm.admm import theory_eps_lower_bound
from dnadmm.instances import toy_problem
from dnadmm.objective import SmoothBounds

problem = toy_problem()
bounds = SmoothBounds(1.0, 2.0)
eps_t = theory_eps_lower_bound(bounds.m_f, bounds.M_f, problem.n, 1.0)
print(f"eps threshold for this instance: {eps_t:.2f}")

# %%
report = certify(problem, Hyper(mu=1.0, eps=eps_t + 1.0, K=2), iters=200, bounds=bounds)
print(report.table())

# %%
# Practical parameters converge much faster, but the rate theorem no
# longer applies, so only the structural checks bind.
report = certify(problem, Hyper(mu=1.0, eps=1.0, K=2), iters=60)
print(report.table())
