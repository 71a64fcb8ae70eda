import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphtf import build_graph, chain, erdos_renyi, grid2d, knn_graph, star
from graphtf.exceptions import DuplicateEdge, IndexOutOfRange, InvalidParameter, SelfLoop
from graphtf.graph import connected_components, grid_coordinates, incidence_matrix, laplacian
from oracles import bfs_components, dense_incidence, graph_edges, same_partition


@st.composite
def random_graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    weights = draw(st.lists(st.floats(0.1, 5.0), min_size=len(chosen), max_size=len(chosen)))
    return build_graph(n, [(i, j, w) for (i, j), w in zip(chosen, weights)])


def test_smallest_connected_graph():
    g = build_graph(2, [(0, 1, 1)])
    assert (g.n, g.m) == (2, 1)
    assert g.is_connected()


def test_chain_of_three_from_edges():
    assert build_graph(3, [(0, 1, 1), (1, 2, 1)]) == chain(3)


def test_self_loop_rejected():
    with pytest.raises(SelfLoop):
        build_graph(3, [(0, 0, 1)])


@pytest.mark.parametrize(
    "edges, exc",
    [
        ([(0, 3)], IndexOutOfRange),
        ([(0, 1), (1, 0)], DuplicateEdge),
        ([(0, 1, 0.0)], InvalidParameter),
        ([(0, 1, -1.0)], InvalidParameter),
        ([(0, 1, np.nan)], InvalidParameter),
        ([(0.5, 1)], InvalidParameter),
    ],
)
def test_invalid_edges(edges, exc):
    with pytest.raises(exc):
        build_graph(3, edges)


def test_nonpositive_node_count():
    with pytest.raises(InvalidParameter):
        build_graph(0, [])


def test_edges_are_canonical():
    g = build_graph(4, [(3, 2), (1, 0), (2, 0)])
    assert [e[:2] for e in g.edges] == [(0, 1), (0, 2), (2, 3)]
    assert np.all(g.src < g.dst)


def test_incidence_chain_of_three():
    assert incidence_matrix(chain(3)).toarray().tolist() == [[-1, 1, 0], [0, -1, 1]]


def test_incidence_weight_scaling():
    assert incidence_matrix(build_graph(2, [(0, 1, 2.0)])).toarray().tolist() == [[-2, 2]]


def test_empty_edge_set():
    g = build_graph(3, [])
    assert incidence_matrix(g).shape == (0, 3)
    assert laplacian(g).nnz == 0
    assert connected_components(g).count == 3


def test_laplacian_chain_of_three():
    assert laplacian(chain(3)).toarray().tolist() == [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]


def test_laplacian_chain_of_two():
    L = laplacian(chain(2)).toarray()
    assert L.tolist() == [[1, -1], [-1, 1]]
    np.testing.assert_allclose(np.linalg.eigvalsh(L), [0, 2], atol=1e-14)


def test_weighted_laplacian_carries_squared_weights():
    L = laplacian(build_graph(2, [(0, 1, 3.0)])).toarray()
    assert L.tolist() == [[9, -9], [-9, 9]]


def test_components_after_cut():
    g = chain(3)
    cc = connected_components(g, excluded_edges={1})
    assert cc.count == 2
    assert cc.members(0).tolist() == [0, 1]
    assert cc.members(1).tolist() == [2]
    assert connected_components(g).count == 1


def test_four_cycle_opposite_cut():
    g = build_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    # canonical order is (0,1), (0,3), (1,2), (2,3)
    cc = connected_components(g, excluded_edges={0, 3})
    ref, count = bfs_components(4, [(1, 2), (0, 3)])
    assert cc.count == count == 2
    assert same_partition(cc.labels, ref)


def test_excluded_edge_out_of_range():
    with pytest.raises(IndexOutOfRange):
        connected_components(chain(3), excluded_edges={5})


def test_grid_size():
    # 2 * 20 * 19 horizontal plus vertical edges; the often-quoted 740 is a miscount
    g = grid2d(20, 20)
    assert (g.n, g.m) == (400, 760)
    assert g.m == 2 * 20 * 19


def test_chain_size():
    assert chain(5).m == 4


def test_star():
    g = star(3)
    assert g.degree.tolist() == [3, 1, 1, 1]


def test_erdos_renyi_deterministic():
    a = erdos_renyi(40, 0.2, seed=7)
    b = erdos_renyi(40, 0.2, seed=7)
    assert np.array_equal(a.edges, b.edges)
    assert not np.array_equal(a.edges, erdos_renyi(40, 0.2, seed=8).edges)


def test_knn_graph_on_line():
    g = knn_graph(np.arange(6.0), 1)
    assert g == chain(6)


def test_knn_is_symmetric_union():
    pts = np.array([[0.0], [1.0], [1.5], [10.0]])
    g = knn_graph(pts, 1)
    # 3's nearest neighbour is 2; 0's is 1; 1 and 2 pick each other
    assert [e[:2] for e in g.edges] == [(0, 1), (1, 2), (2, 3)]


def test_grid_coordinates_numbering():
    C = grid_coordinates(2, 3)
    assert C[4].tolist() == [1.0, 1.0]
    g = grid2d(2, 3)
    for i, j, _ in g.edges:
        assert np.abs(C[i] - C[j]).sum() == 1


@given(random_graphs())
def test_incidence_matches_loop_oracle_and_gram(g):
    D = incidence_matrix(g).toarray()
    np.testing.assert_array_equal(D, dense_incidence(g.n, graph_edges(g)))
    np.testing.assert_allclose(D.T @ D, laplacian(g).toarray(), atol=1e-12)


@given(random_graphs(), st.integers(0, 2**32 - 1))
def test_laplacian_psd_and_constant_null(g, seed):
    L = laplacian(g).toarray()
    X = np.random.default_rng(seed).standard_normal((100, g.n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    assert np.all(np.einsum("ij,jk,ik->i", X, L, X) >= -1e-10)
    np.testing.assert_allclose(L @ np.ones(g.n), 0, atol=1e-12)


@given(random_graphs(), st.data())
def test_components_match_bfs(g, data):
    excl = data.draw(st.sets(st.integers(0, max(g.m - 1, 0)), max_size=g.m)) if g.m else set()
    cc = connected_components(g, excl)
    kept = [e for k, e in enumerate(graph_edges(g)) if k not in excl]
    ref, count = bfs_components(g.n, kept)
    assert cc.count == count
    assert same_partition(cc.labels, ref)
    # ids follow the smallest node of each component
    firsts = [int(cc.members(c)[0]) for c in range(cc.count)]
    assert firsts == sorted(firsts)


def test_generators_are_pure():
    assert grid2d(4, 5) == grid2d(4, 5)
    assert chain(7) == chain(7)
    assert hash(grid2d(3, 3)) == hash(grid2d(3, 3))
