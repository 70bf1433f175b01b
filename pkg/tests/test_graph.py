import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnadmm.exceptions import GraphError
from dnadmm.graph import (
    Graph,
    anchored_laplacian,
    build_random_connected,
    constraint_adjoint,
    constraint_map,
    incidence_matrix,
    lambda_min_anchor,
    laplacian_parts,
)

PATH3 = Graph(3, [(0, 1), (1, 2)])


def test_two_agents_full_probability_gives_single_edge():
    g = build_random_connected(2, 1.0, 0)
    assert g.edges == ((0, 1),)


def test_complete_graph_when_p_is_one():
    g = build_random_connected(4, 1.0, 7)
    assert g.m == 6
    assert set(g.edges) == {(i, j) for i in range(4) for j in range(i + 1, 4)}


def test_random_graph_is_deterministic():
    a = build_random_connected(20, 0.2, 1)
    b = build_random_connected(20, 0.2, 1)
    assert a.edges == b.edges
    # frozen: first draw of this seed
    assert a.m == 40
    assert a.edges[:5] == ((0, 4), (0, 7), (0, 8), (0, 12), (1, 2))


@pytest.mark.parametrize("n,p", [(1, 0.5), (5, 0.0), (5, -0.1), (5, 1.5)])
def test_random_graph_rejects_bad_parameters(n, p):
    with pytest.raises(GraphError):
        build_random_connected(n, p, 0)


def test_resample_cap_reports_diagnostic():
    with pytest.raises(GraphError, match="no connected sample"):
        build_random_connected(30, 0.01, 0, max_resample=3)


@pytest.mark.parametrize(
    "n,edges,anchor",
    [
        (1, [], 0),
        (3, [(0, 0), (1, 2)], 0),
        (3, [(0, 1), (1, 0), (1, 2)], 0),
        (3, [(0, 1)], 0),
        (3, [(0, 1), (1, 3)], 0),
        (3, [(0, 1), (1, 2)], 3),
    ],
    ids=["too-small", "self-loop", "duplicate", "disconnected", "out-of-range", "bad-anchor"],
)
def test_graph_invariants_are_enforced(n, edges, anchor):
    with pytest.raises(GraphError):
        Graph(n, edges, anchor)


def test_edges_are_normalized():
    g = Graph(3, [(2, 1), (1, 0)])
    assert g.edges == ((0, 1), (1, 2))
    assert g.neighbors == ((1,), (0, 2), (1,))


def test_incidence_path():
    inc = incidence_matrix(PATH3)
    np.testing.assert_array_equal(inc[:, 0], [1, -1, 0])
    np.testing.assert_array_equal(inc[:, 1], [0, 1, -1])


def test_incidence_single_edge():
    np.testing.assert_array_equal(incidence_matrix(Graph(2, [(0, 1)]))[:, 0], [1, -1])


def test_laplacian_parts_path():
    lp = laplacian_parts(PATH3)
    np.testing.assert_array_equal(lp.diag, [1, 2, 1])
    assert lp.offdiag[0, 1] == lp.offdiag[1, 2] == -1
    assert lp.offdiag[0, 2] == 0


def test_laplacian_parts_triangle():
    g = Graph(3, [(0, 1), (0, 2), (1, 2)])
    np.testing.assert_array_equal(laplacian_parts(g).diag, [2, 2, 2])


def test_lambda_min_single_edge():
    assert lambda_min_anchor(Graph(2, [(0, 1)])) == pytest.approx((3 - np.sqrt(5)) / 2, abs=1e-12)


def test_lambda_min_path():
    # eigenvalues of this tridiagonal matrix are 2 - 2 cos((2k-1) pi / 7)
    assert lambda_min_anchor(PATH3) == pytest.approx(2 - 2 * np.cos(np.pi / 7), abs=1e-12)
    assert lambda_min_anchor(PATH3) == pytest.approx(0.19806226419516165, abs=1e-14)


def test_constraint_map_matches_dense_B(rng):
    g = build_random_connected(7, 0.4, 3, anchor=2)
    d = 3
    inc = incidence_matrix(g)
    E = np.zeros((g.n, 1))
    E[g.anchor] = 1
    B = np.kron(np.hstack([inc, E]), np.eye(d))
    x = rng.standard_normal((g.n, d))
    y = rng.standard_normal((g.m + 1, d))
    np.testing.assert_allclose(constraint_map(g, x).ravel(), B.T @ x.ravel(), atol=1e-12)
    np.testing.assert_allclose(constraint_adjoint(g, y).ravel(), B @ y.ravel(), atol=1e-12)
    np.testing.assert_allclose(B @ B.T, np.kron(anchored_laplacian(g), np.eye(d)), atol=1e-12)


def test_json_round_trip(tmp_path):
    g = build_random_connected(9, 0.3, 5, anchor=4)
    path = tmp_path / "g.json"
    g.to_json(path)
    assert json.loads(path.read_text()) == {"n": 9, "anchor": 4, "edges": [list(e) for e in g.edges]}
    assert Graph.from_json(str(path)) == g
    assert Graph.from_json(g.to_json()) == g


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 50), p=st.floats(0.05, 1.0), seed=st.integers(0, 10_000))
def test_generated_graph_properties(n, p, seed):
    p = min(1.0, max(p, 2 * np.log(n) / n))  # keep resampling cheap
    g = build_random_connected(n, p, seed, anchor=seed % n)
    inc = incidence_matrix(g)
    lp = laplacian_parts(g)
    np.testing.assert_array_equal(inc @ inc.T, np.diag(lp.diag) + lp.offdiag)
    np.testing.assert_array_equal(inc.sum(axis=0), 0)
    assert np.all(lp.diag >= 1) and np.all(lp.diag <= n - 1)
    M = anchored_laplacian(g)
    np.testing.assert_array_equal(M, M.T)
    assert np.linalg.eigvalsh(M)[0] > 1e-12
