import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surrogate_mrf.graph import Graph, cycle_graph, grid_graph, path_graph, random_tree


def test_grid_counts_and_metadata():
    g = grid_graph(3, 4)
    assert g.num_nodes == 12
    assert g.num_edges == 3 * 3 + 2 * 4
    assert g.grid == (3, 4)
    assert all(s < t for s, t in g.edges)


@pytest.mark.parametrize("edges, message", [
    (((0, 0),), "self-loop"),
    (((0, 1), (0, 1)), "duplicate"),
    (((1, 0),), "s < t"),
    (((0, 5),), "out of range"),
    (((0, 1),), "connected"),
])
def test_invalid_graphs_rejected(edges, message):
    n = 3 if message == "connected" else 2
    with pytest.raises(ValueError, match=message):
        Graph(n, edges)


def test_laplacian_rows_sum_to_zero():
    L = grid_graph(3, 3).laplacian()
    assert np.allclose(L.sum(axis=1), 0)
    assert np.allclose(L, L.T)


def test_detect_grid_recovers_lattice_from_bare_edges():
    g = grid_graph(3, 5)
    bare = Graph(g.num_nodes, g.edges)
    assert bare.grid is None
    assert bare.detect_grid().grid == (3, 5)
    # ring numbering 0-1-2-3 is not row-major lattice numbering
    assert cycle_graph(4).detect_grid().grid is None
    assert cycle_graph(5).detect_grid().grid is None


@given(st.integers(2, 30), st.integers(0, 2 ** 32 - 1))
def test_random_tree_is_a_spanning_tree(n, seed):
    g = random_tree(n, np.random.default_rng(seed))
    assert g.is_tree()
    assert g.num_nodes == n


def test_path_and_cycle():
    assert path_graph(5).is_tree()
    assert cycle_graph(6).num_edges == 6
    with pytest.raises(ValueError):
        cycle_graph(2)
