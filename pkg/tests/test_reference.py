import json

import numpy as np
import pytest

from dnadmm.exceptions import MaxItersReached, OracleError
from dnadmm.graph import Graph, anchored_laplacian, constraint_adjoint, constraint_map, incidence_matrix
from dnadmm.instances import consensus_average_problem, random_problem, synthetic_lasso
from dnadmm.objective import L1, QuadraticCost, Zero
from dnadmm.reference import (
    ReferenceSolution,
    dual_optimal,
    kkt_residuals,
    range_projection_residual,
    reference_solution,
    solve_centralized,
)


def test_soft_threshold_closed_form():
    x, obj = solve_centralized([QuadraticCost(np.eye(2), [2.0, 0.5])], L1(1.0))
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)
    # 0.5 * (1 + 0.25) + 1
    assert obj == pytest.approx(1.625, abs=1e-12)


def test_smooth_case_is_linear_solve():
    problem = random_problem(5, 4, seed=3, weight=0)
    x, _ = solve_centralized(problem.costs, Zero())
    H = sum(c.design.T @ c.design for c in problem.costs) + sum(c.ridge for c in problem.costs) * np.eye(4)
    rhs = sum(c.design.T @ c.target for c in problem.costs)
    np.testing.assert_allclose(x, np.linalg.solve(H, rhs), atol=1e-10)


def test_huge_weight_gives_zero():
    problem = random_problem(4, 3, seed=5)
    x, _ = solve_centralized(problem.costs, L1(1e6))
    np.testing.assert_array_equal(x, 0.0)


def test_objective_is_monotone():
    problem = synthetic_lasso(n=10, d=6, rows_per_agent=4, weight=0.05, seed=2)
    hist = []
    solve_centralized(problem.costs, problem.regularizer, history=hist)
    assert len(hist) > 2
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(hist, hist[1:]))


def test_iteration_cap():
    problem = synthetic_lasso(n=10, d=6, rows_per_agent=4, weight=0.05, seed=2)
    with pytest.raises(MaxItersReached):
        solve_centralized(problem.costs, problem.regularizer, max_iters=2)


def test_consensus_dual_by_hand():
    problem = consensus_average_problem([1.0, 3.0])
    x, _ = solve_centralized(problem.costs, Zero())
    assert x[0] == pytest.approx(2.0, abs=1e-12)
    y = dual_optimal(x, problem.costs, problem.graph)
    np.testing.assert_allclose(y.ravel(), [-1.0, 0.0], atol=1e-12)
    grad = problem.grad_F(np.tile(x, (2, 1)))
    np.testing.assert_allclose(grad.ravel(), [1.0, -1.0], atol=1e-12)
    assert np.linalg.norm(grad + constraint_adjoint(problem.graph, y)) == 0.0


def test_dual_zero_when_minimizers_coincide():
    g = Graph(3, [(0, 1), (1, 2)])
    costs = [QuadraticCost(np.eye(2) * s, np.array([1.0, -2.0]) * s) for s in (1.0, 2.0, 0.5)]
    y = dual_optimal(np.array([1.0, -2.0]), costs, g)
    np.testing.assert_allclose(y, 0.0, atol=1e-14)


def test_dual_rejects_inaccurate_primal():
    problem = random_problem(4, 2, seed=9, weight=0.5)
    x, _ = solve_centralized(problem.costs, problem.regularizer)
    with pytest.raises(OracleError):
        dual_optimal(x + 0.3, problem.costs, problem.graph, problem.regularizer)


def test_dual_unique_across_solvers():
    problem = random_problem(8, 3, seed=4)
    sol = reference_solution(problem)
    # same system solved with a different factorization path (explicit inverse)
    grad = problem.grad_F(sol.x)
    w = np.linalg.inv(anchored_laplacian(problem.graph)) @ -grad
    np.testing.assert_allclose(constraint_map(problem.graph, w), sol.y, atol=1e-10)
    assert range_projection_residual(problem.graph, sol.y) < 1e-12


def test_reference_kkt_and_range():
    problem = synthetic_lasso(seed=1)
    sol = reference_solution(problem)
    assert sol.residuals.r_a <= 1e-8 and sol.residuals.r_b and sol.residuals.r_c <= 1e-8
    assert range_projection_residual(problem.graph, sol.y) <= 1e-10
    step = 1.0 / np.linalg.eigvalsh(sum(c.hessian_matrix for c in problem.costs))[-1]
    grad = sum(c.gradient(sol.x_star) for c in problem.costs)
    fp = np.linalg.norm(sol.x_star - problem.regularizer.prox(sol.x_star - step * grad, step))
    assert fp <= 1e-12
    np.testing.assert_array_equal(sol.z_star, sol.x_star)


def test_global_cost_at_optimum_is_minimal(rng):
    problem = random_problem(6, 3, seed=6)
    sol = reference_solution(problem)
    for _ in range(100):
        assert problem.objective(sol.x_star + 0.1 * rng.standard_normal(3)) >= sol.obj_star


def test_kkt_residual_cases(rng):
    problem = random_problem(5, 2, seed=7)
    sol = reference_solution(problem)
    res = kkt_residuals(sol.x, sol.z_star, sol.y, problem)
    assert res.r_a <= 1e-8 and res.r_b and res.r_c <= 1e-8

    x = sol.x.copy()
    x[1] += 1.0
    assert kkt_residuals(x, sol.z_star, sol.y, problem).r_c > 0.5

    g = problem.graph
    xr = rng.standard_normal((g.n, 2))
    yr = rng.standard_normal((g.m + 1, 2))
    E = np.zeros((g.n, 1))
    E[g.anchor] = 1
    B = np.kron(np.hstack([incidence_matrix(g), E]), np.eye(2))
    grad = np.concatenate([c.gradient(xi) for c, xi in zip(problem.costs, xr)])
    dense = np.linalg.norm(grad + B @ yr.ravel())
    assert kkt_residuals(xr, xr[g.anchor], yr, problem).r_a == pytest.approx(dense, abs=1e-12)


def test_serialization_and_cache(tmp_path):
    problem = random_problem(5, 2, seed=8)
    sol = reference_solution(problem, cache_dir=tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    doc = json.loads(files[0].read_text())
    assert doc["fingerprint"] == problem.fingerprint()
    again = reference_solution(problem, cache_dir=tmp_path)
    np.testing.assert_array_equal(again.x_star, sol.x_star)
    back = ReferenceSolution.from_dict(sol.to_dict())
    np.testing.assert_array_equal(back.y, sol.y)
    assert back.x.shape == (5, 2)
