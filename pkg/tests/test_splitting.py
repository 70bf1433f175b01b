import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnadmm.graph import Graph
from dnadmm.instances import random_problem
from dnadmm.objective import Problem, QuadraticCost
from dnadmm.splitting import (
    CouplingApplier,
    apply_coupling,
    build_diag_blocks,
    dense_approx_inverse,
    dense_coupling,
    dense_hessian,
    gamma_bound,
    newton_direction,
    spectral_radius_bound,
)

PATH3 = Graph(3, [(0, 1), (1, 2)], anchor=0)
UNIT_COSTS = [QuadraticCost([[1.0]], [0.0]) for _ in range(3)]


def p3_blocks(mu=1.0, eps=0.5):
    return build_diag_blocks(UNIT_COSTS, np.zeros((3, 1)), PATH3, mu, eps)


def test_p3_diagonal_blocks():
    np.testing.assert_allclose(p3_blocks().blocks.ravel(), [4.5, 5.5, 3.5])


def test_blocks_approach_hessian_for_large_mu():
    D = build_diag_blocks(UNIT_COSTS, np.zeros((3, 1)), PATH3, 1e12, 0.0)
    np.testing.assert_allclose(D.blocks.ravel(), 1.0, atol=1e-11)


def test_dense_D_minus_H_is_N():
    problem = random_problem(6, 3, seed=2)
    mu, eps = 0.7, 0.3
    D = build_diag_blocks(problem.costs, np.zeros((6, 3)), problem.graph, mu, eps)
    H = dense_hessian(problem, mu, eps)
    np.testing.assert_allclose(D.dense() - H, dense_coupling(problem.graph, mu, 3), atol=1e-12)


def test_blocks_reject_bad_parameters():
    with pytest.raises(ValueError):
        build_diag_blocks(UNIT_COSTS, np.zeros((3, 1)), PATH3, 0.0, 0.0)
    with pytest.raises(ValueError):
        build_diag_blocks(UNIT_COSTS, np.zeros((3, 1)), PATH3, 1.0, -1.0)


def test_coupling_p3():
    cpl = CouplingApplier(PATH3, 1.0)
    np.testing.assert_array_equal(apply_coupling(cpl, np.array([1.0, 0, 0])), [1, 1, 0])
    np.testing.assert_array_equal(apply_coupling(cpl, np.zeros(3)), 0)


def test_coupling_matches_dense(rng):
    problem = random_problem(9, 4, seed=8)
    cpl = CouplingApplier(problem.graph, 2.5)
    u = rng.standard_normal((9, 4))
    N = dense_coupling(problem.graph, 2.5, 4)
    np.testing.assert_allclose(apply_coupling(cpl, u).ravel(), N @ u.ravel(), atol=1e-12)
    np.testing.assert_allclose(apply_coupling(cpl, u.ravel()), N @ u.ravel(), atol=1e-12)
    assert np.linalg.eigvalsh(N)[0] > -1e-12


def test_coupling_dimension_mismatch():
    cpl = CouplingApplier(PATH3, 1.0)
    with pytest.raises(ValueError):
        apply_coupling(cpl, np.zeros(4))
    with pytest.raises(ValueError):
        apply_coupling(cpl, np.zeros((2, 1)))


def test_direction_p3_orders():
    D = p3_blocks()
    cpl = CouplingApplier(PATH3, 1.0)
    h = np.array([[4.5], [5.5], [3.5]])
    np.testing.assert_allclose(newton_direction(0, D, cpl, h).ravel(), [1, 1, 1])
    u1 = newton_direction(1, D, cpl, h).ravel()
    np.testing.assert_allclose(u1, [1 + 2 / 4.5, 1 + 4 / 5.5, 1 + 2 / 3.5], rtol=1e-15)
    dense = dense_approx_inverse(1, D.dense(), dense_coupling(PATH3, 1.0, 1)) @ h.ravel()
    np.testing.assert_allclose(u1, dense, rtol=1e-12)


def test_direction_uses_exactly_K_couplings():
    D = p3_blocks()
    calls = []
    base = CouplingApplier(PATH3, 1.0)

    def counting(u):
        calls.append(1)
        return base(u)

    newton_direction(4, D, counting, np.ones((3, 1)))
    assert len(calls) == 4
    with pytest.raises(ValueError):
        newton_direction(-1, D, base, np.ones((3, 1)))


def test_approx_inverse_K0_is_D_inverse():
    D = p3_blocks().dense()
    np.testing.assert_allclose(dense_approx_inverse(0, D, dense_coupling(PATH3, 1.0, 1)), np.linalg.inv(D),
                               atol=1e-14)


def test_approx_inverse_converges_to_H_inverse():
    problem = random_problem(5, 2, seed=1)
    mu, eps = 1.0, 1.0
    D = build_diag_blocks(problem.costs, np.zeros((5, 2)), problem.graph, mu, eps).dense()
    N = dense_coupling(problem.graph, mu, 2)
    H = D - N
    Hinv = np.linalg.inv(H)
    ratio = spectral_radius_bound(problem.n, mu, problem.bounds.m_f, eps)
    # Neumann tail: ||H^-1 - Hhat^-1(K)|| <= ||D^-1|| rho^{K+1} / (1 - rho)
    tail = np.linalg.norm(np.linalg.inv(D), 2) * ratio ** 201 / (1 - ratio)
    err = np.linalg.norm(dense_approx_inverse(200, D, N) - Hinv, 2)
    assert err <= tail + 1e-12


def test_approx_inverse_without_coupling():
    D = p3_blocks(mu=1e15, eps=0.5).dense()
    N = dense_coupling(PATH3, 1e15, 1)
    for K in (0, 3, 7):
        np.testing.assert_allclose(dense_approx_inverse(K, D, N), np.linalg.inv(D), atol=1e-12)


def test_approx_inverse_size_cap():
    with pytest.raises(ValueError, match="dense oracle"):
        dense_approx_inverse(0, np.eye(401), np.zeros((401, 401)))


def test_spectral_bound_values():
    assert spectral_radius_bound(2, 1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert spectral_radius_bound(5, np.inf, 1.0, 0.0) == 0.0
    assert spectral_radius_bound(50, 1e9, 1.0, 0.0) < 1e-7
    with pytest.raises(ValueError):
        spectral_radius_bound(1, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        spectral_radius_bound(3, 1.0, 0.0, 0.0)


def test_gamma_values():
    assert gamma_bound(3, 1.0, 1.0, 2.0, 1.0, 0) == pytest.approx(31 / 3, rel=1e-14)
    assert gamma_bound(3, 1.0, 1.0, 2.0, 1.0, 500) == pytest.approx(5.0, rel=1e-14)
    with pytest.raises(ValueError):
        gamma_bound(3, 1.0, 2.0, 1.0, 1.0, 0)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 40), mu=st.floats(1e-2, 1e2), m_f=st.floats(1e-2, 10), eps=st.floats(0, 10),
       span=st.floats(0, 10))
def test_gamma_nonincreasing_in_K(n, mu, m_f, eps, span):
    g = [gamma_bound(n, mu, m_f, m_f + span, eps, K) for K in range(12)]
    assert all(a >= b for a, b in zip(g, g[1:]))
    assert 0 < spectral_radius_bound(n, mu, m_f, eps) < 1


def test_H_hat_error_bound():
    # ||Hhat(K) - H|| <= (M_f + eps + (1 + 2(n-1))/mu) rho^{K+1}
    for seed in range(5):
        problem = random_problem(6, 2, seed=seed)
        mu, eps = 0.5, 0.2
        b = problem.bounds
        D = build_diag_blocks(problem.costs, np.zeros((6, 2)), problem.graph, mu, eps).dense()
        N = dense_coupling(problem.graph, mu, 2)
        H = D - N
        rho = spectral_radius_bound(problem.n, mu, b.m_f, eps)
        for K in (0, 1, 3, 6):
            Hhat = np.linalg.inv(dense_approx_inverse(K, D, N))
            bound = (b.M_f + eps + (1 + 2 * (problem.n - 1)) / mu) * rho ** (K + 1)
            assert np.linalg.norm(Hhat - H, 2) <= bound * (1 + 1e-10)


def test_problem_dimension_checks():
    with pytest.raises(ValueError):
        Problem(PATH3, UNIT_COSTS[:2])
    with pytest.raises(ValueError):
        Problem(PATH3, UNIT_COSTS[:2] + [QuadraticCost(np.eye(2), [0, 0])])
