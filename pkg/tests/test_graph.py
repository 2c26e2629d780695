import numpy as np
import pytest

from pnarm import Network, ddp_weights, shortest_path_matrix

from helpers import path_network, random_connected_network


def test_path_graph_distances(path3):
    d = shortest_path_matrix(path3)
    assert d[0, 2] == 2
    assert d[2, 0] == 2
    assert np.all(np.diag(d) == 0)


def test_disconnected_pair_is_infinite():
    net = Network(["a", "b", "c", "d"], np.array([
        [0, 1, 0, 0],
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ], dtype=bool))
    d = shortest_path_matrix(net)
    assert np.isinf(d[0, 2]) and np.isinf(d[1, 3])
    assert d[0, 1] == 1 and d[2, 3] == 1


def test_single_node_distance():
    net = Network(["solo"], np.zeros((1, 1), dtype=bool))
    assert shortest_path_matrix(net) == np.zeros((1, 1))


def test_distances_satisfy_triangle_inequality(rng):
    for _ in range(5):
        net = random_connected_network(8, rng)
        d = shortest_path_matrix(net)
        assert np.array_equal(d, d.T)
        for i in range(8):
            for j in range(8):
                for k in range(8):
                    assert d[i, j] <= d[i, k] + d[k, j]


def test_ddp_weights_zero_decay_gives_uniform(path5):
    w = ddp_weights(shortest_path_matrix(path5), 0.0)
    off = w[~np.eye(5, dtype=bool)]
    assert np.allclose(off, 1.0)
    assert np.all(np.diag(w) == 0)


def test_ddp_weights_path_graph_log2_decay(path3):
    # raw weights from row 0 are (1/2, 1/4); rescaling to sum 2 gives (4/3, 2/3)
    w = ddp_weights(shortest_path_matrix(path3), np.log(2.0))
    assert np.allclose(w[0], [0.0, 4.0 / 3.0, 2.0 / 3.0])


def test_ddp_weights_two_node_pair():
    net = Network(["a", "b"], np.array([[0, 1], [1, 0]], dtype=bool))
    for decay in (0.0, 0.7, 3.0):
        w = ddp_weights(shortest_path_matrix(net), decay)
        assert w[0, 1] == pytest.approx(1.0)
        assert w[1, 0] == pytest.approx(1.0)


def test_ddp_weights_rows_sum_to_n_minus_one(rng):
    for _ in range(10):
        n = int(rng.integers(2, 12))
        net = random_connected_network(n, rng)
        decay = float(rng.uniform(0.0, 3.0))
        w = ddp_weights(shortest_path_matrix(net), decay)
        assert np.allclose(w.sum(axis=1), n - 1, atol=1e-12)
        assert np.all(w >= 0)


def test_ddp_weights_permutation_equivariance(rng):
    net = random_connected_network(7, rng)
    d = shortest_path_matrix(net)
    w = ddp_weights(d, 1.3)
    perm = rng.permutation(7)
    w_perm = ddp_weights(d[np.ix_(perm, perm)], 1.3)
    assert np.allclose(w_perm, w[np.ix_(perm, perm)])


def test_ddp_weights_monotone_in_distance(path5):
    d = shortest_path_matrix(path5)
    w = ddp_weights(d, 0.8)
    # from node 0, distances 1 < 2 < 3 < 4 give strictly decreasing weights
    assert w[0, 1] > w[0, 2] > w[0, 3] > w[0, 4] > 0


def test_ddp_weights_disconnected_pairs_get_zero():
    net = Network(["a", "b", "c", "d"], np.array([
        [0, 1, 0, 0],
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ], dtype=bool))
    w = ddp_weights(shortest_path_matrix(net), 1.0)
    assert w[0, 2] == 0 and w[0, 3] == 0
    assert w[0, 1] == pytest.approx(3.0)  # single reachable neighbour carries N-1
    assert np.allclose(w.sum(axis=1), 3.0)


def test_ddp_weights_fully_isolated_node_errors():
    net = Network(["a", "b", "c"], np.array([
        [0, 1, 0],
        [1, 0, 0],
        [0, 0, 0],
    ], dtype=bool))
    with pytest.raises(ValueError, match="unreachable"):
        ddp_weights(shortest_path_matrix(net), 1.0)


def test_network_validation():
    with pytest.raises(ValueError, match="symmetric"):
        Network(["a", "b"], np.array([[0, 1], [0, 0]], dtype=bool))
    with pytest.raises(ValueError, match="diagonal"):
        Network(["a"], np.array([[1]], dtype=bool))
    with pytest.raises(ValueError, match="population"):
        Network(["a", "b"], np.zeros((2, 2), dtype=bool), population=np.array([1.0, -2.0]))
