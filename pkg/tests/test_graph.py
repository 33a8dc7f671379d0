import numpy as np
import pytest

from dfagnn.core.graph import apply_operator_power, build_graph, normalized_operator, perturb
from dfagnn.core.numkit import make_rng
from dfagnn.errors import GraphError


def test_build_graph_canonicalises_edges():
    g = build_graph(4, [(1, 0), (0, 1), (2, 2), (3, 1), (1, 3)])
    assert g.num_edges == 2
    assert g.edges.tolist() == [[0, 1], [1, 3]]
    adj = g.adjacency.toarray()
    assert np.array_equal(adj, adj.T)
    assert np.all(np.diag(adj) == 0)
    assert g.degrees().tolist() == [1, 2, 0, 1]


def test_build_graph_rejects_out_of_range():
    with pytest.raises(GraphError, match=r"\(0, 5\)"):
        build_graph(3, [(0, 1), (0, 5)])


def test_empty_graph():
    g = build_graph(3, [])
    assert g.num_edges == 0
    s = normalized_operator(g).toarray()
    assert np.allclose(s, np.eye(3))


def test_normalized_operator_two_node_graph():
    s = normalized_operator(build_graph(2, [(0, 1)])).toarray()
    assert np.allclose(s, 0.5)


def test_normalized_operator_is_bitwise_symmetric(six_node_operator, six_node_graph):
    s = six_node_operator.toarray()
    assert np.array_equal(s, s.T)
    a = six_node_graph.adjacency.toarray() + np.eye(6)
    d = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
    assert np.allclose(s, d @ a @ d)


def test_apply_operator_power_matches_dense(six_node_operator, rng):
    x = rng.standard_normal((6, 3))
    s = six_node_operator.toarray()
    assert np.allclose(apply_operator_power(six_node_operator, x, 3), np.linalg.matrix_power(s.T, 3) @ x)
    assert np.array_equal(apply_operator_power(six_node_operator, x, 0), x)
    with pytest.raises(ValueError):
        apply_operator_power(six_node_operator, x, -1)


@pytest.fixture
def ring():
    n = 40
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def test_perturb_add_inserts_exact_count(ring):
    out = perturb(ring, "add", 0.5, make_rng(0))
    assert out.num_edges == ring.num_edges + 20
    assert set(map(tuple, ring.edges.tolist())) <= set(map(tuple, out.edges.tolist()))


def test_perturb_remove_keeps_the_rest(ring):
    out = perturb(ring, "remove", 0.8, make_rng(0))
    assert out.num_edges == ring.num_edges - int(np.floor(0.8 * ring.num_edges))
    assert set(map(tuple, out.edges.tolist())) <= set(map(tuple, ring.edges.tolist()))


def test_perturb_flip_touches_exact_count(ring):
    out = perturb(ring, "flip", 0.5, make_rng(3))
    before = set(map(tuple, ring.edges.tolist()))
    after = set(map(tuple, out.edges.tolist()))
    assert len(before ^ after) == 20


def test_perturb_zero_rate_and_determinism(ring):
    same = perturb(ring, "flip", 0.0, make_rng(0))
    assert np.array_equal(same.edges, ring.edges)
    a = perturb(ring, "add", 0.3, make_rng(9))
    b = perturb(ring, "add", 0.3, make_rng(9))
    assert np.array_equal(a.edges, b.edges)


def test_perturb_errors(ring):
    with pytest.raises(GraphError):
        perturb(ring, "add", -0.1, make_rng(0))
    with pytest.raises(GraphError):
        perturb(ring, "remove", 1.5, make_rng(0))
    with pytest.raises(GraphError):
        perturb(build_graph(3, [(0, 1), (1, 2), (0, 2)]), "add", 1.0, make_rng(0))
    with pytest.raises(GraphError):
        perturb(ring, "rewire", 0.1, make_rng(0))


def test_operator_powers_compose(six_node_operator, rng):
    x = rng.standard_normal((6, 4))
    whole = apply_operator_power(six_node_operator, x, 5)
    staged = apply_operator_power(six_node_operator, apply_operator_power(six_node_operator, x, 2), 3)
    assert np.allclose(whole, staged, rtol=0, atol=1e-10)


def test_two_node_operator_is_idempotent():
    s = normalized_operator(build_graph(2, [(0, 1)]))
    assert np.allclose(apply_operator_power(s, np.eye(2), 2), [[0.5, 0.5], [0.5, 0.5]])


def test_flip_on_complete_graph_only_removes():
    k4 = build_graph(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])
    out = perturb(k4, "flip", 0.5, make_rng(5))
    assert out.num_edges == 3
    assert set(map(tuple, out.edges.tolist())) < set(map(tuple, k4.edges.tolist()))


def test_remove_exact_count_and_node_count():
    g = build_graph(10, [(i, (i + 1) % 10) for i in range(10)])
    for kind in ("add", "remove", "flip"):
        assert perturb(g, kind, 0.2, make_rng(1)).n == 10
    assert perturb(g, "remove", 0.2, make_rng(1)).num_edges == 8
