import json

import numpy as np
import pytest

import dnadmm.admm as admm
from dnadmm.admm import Hyper, step_with_info
from dnadmm.certify import TOLERANCES, certify
from dnadmm.graph import constraint_adjoint, constraint_map
from dnadmm.instances import consensus_average_problem, toy_problem
from dnadmm.objective import SmoothBounds
from dnadmm.splitting import CouplingApplier

THEORY = Hyper(mu=1.0, eps=127.0, K=2)
EXACT = SmoothBounds(1.0, 2.0)


@pytest.fixture(scope="module")
def theory_report():
    return certify(toy_problem(), THEORY, iters=200, bounds=EXACT)


def flipped_direction_coupling(state, problem, hyper):
    neg = CouplingApplier(problem.graph, hyper.mu)
    return step_with_info(state, problem, hyper, coupling=lambda u: -neg(u))


def flipped_gradient_coupling(state, problem, hyper):
    def grad(problem, x, y, theta_hat, mu):
        g = problem.graph
        resid = constraint_map(g, x)
        resid[-1] -= theta_hat
        return problem.grad_F(x) - constraint_adjoint(g, resid) / mu + constraint_adjoint(g, y)

    orig = admm.lagrangian_gradient
    admm.lagrangian_gradient = grad
    try:
        return step_with_info(state, problem, hyper)
    finally:
        admm.lagrangian_gradient = orig


def test_theory_mode_passes(theory_report):
    assert theory_report.passed
    assert set(theory_report.checks) == set(TOLERANCES)
    for c in theory_report.checks.values():
        assert c.iterations == 200
        assert c.binding
        assert c.passed, c


def test_report_serialization(theory_report, tmp_path):
    path = tmp_path / "cert.json"
    theory_report.to_json(path)
    doc = json.loads(path.read_text())
    assert doc["passed"] is True
    assert doc["params"]["eps_theory"] == pytest.approx(126.75)
    assert doc["params"]["delta"] > 0
    table = theory_report.table()
    assert table.splitlines()[-1] == "verdict: PASS"
    assert len(table.splitlines()) == len(TOLERANCES) + 2


def test_practical_mode_contraction_is_informational():
    report = certify(toy_problem(), Hyper(mu=1.0, eps=1.0, K=2), iters=60)
    assert not report["T1"].binding
    assert report.passed
    assert report.params["delta"] == 0.0


def test_flipped_gradient_coupling_fails_L4_and_T1():
    report = certify(toy_problem(), THEORY, iters=200, bounds=EXACT, step=flipped_gradient_coupling)
    assert not report.passed
    assert not report["L4"].passed
    assert not report["T1"].passed


def test_flipped_direction_coupling_fails_L4():
    # only the search direction changes; the fixed point and the Lyapunov decrease survive
    report = certify(toy_problem(), THEORY, iters=200, bounds=EXACT, step=flipped_direction_coupling)
    assert not report.passed
    assert not report["L4"].passed
    assert report["L1"].passed and report["L2"].passed and report["L3"].passed


def test_zero_regularizer_subgradient_check():
    problem = consensus_average_problem([1.0, 3.0, -2.0])
    report = certify(problem, Hyper(mu=1.0, eps=1.0, K=1), iters=80)
    assert report["L3"].passed
    assert report["L3"].worst <= TOLERANCES["L3"]
    np.testing.assert_allclose(report.params["m_f"], 1.0)
