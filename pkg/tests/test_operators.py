import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphtf import DifferenceOperator, build_graph, chain, erdos_renyi, grid2d, star
from graphtf.exceptions import DimensionMismatch, NotAChain, TooLarge, UnsupportedOrder, WeightedGraph
from graphtf.operators import (
    boundary_sign,
    boundary_trim,
    elementwise_penalty,
    graph_difference_operator,
    max_column_norm_pinv,
    penalty_value,
    pseudoinverse,
    singular_values,
    univariate_difference_operator,
)
from oracles import bfs_components, dense_delta, graph_edges
from test_graph import random_graphs

L3 = [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]


def test_chain3_k1_is_laplacian():
    assert DifferenceOperator(chain(3), 1).toarray().tolist() == L3


def test_k0_is_incidence():
    g = erdos_renyi(15, 0.3, seed=2)
    np.testing.assert_array_equal(DifferenceOperator(g, 0).toarray(), g.incidence.toarray())


def test_constant_in_null_space_grid():
    out = DifferenceOperator(grid2d(3, 3), 2).apply(np.full(9, 4.2))
    np.testing.assert_allclose(out, 0, atol=1e-12)


def test_apply_by_hand():
    assert DifferenceOperator(chain(3), 0).apply([3, 1, 2]).tolist() == [-2, 1]


def test_apply_k1_dense_oracle():
    out = DifferenceOperator(chain(3), 1).apply([1, 2, 3])
    np.testing.assert_allclose(out, np.array(L3) @ [1, 2, 3])
    assert out.tolist() == [-1, 0, 1]


def test_shapes_and_parity():
    g = grid2d(3, 4)
    assert DifferenceOperator(g, 0).shape == (g.m, g.n)
    assert DifferenceOperator(g, 1).shape == (g.n, g.n)
    assert DifferenceOperator(g, 2).stages == ["D", "L"]
    assert DifferenceOperator(g, 3).q == 2
    assert DifferenceOperator(g, 3).parity == "odd"


def test_dimension_checks():
    op = DifferenceOperator(chain(4), 0)
    with pytest.raises(DimensionMismatch):
        op.apply(np.ones(3))
    with pytest.raises(DimensionMismatch):
        op.apply_transpose(np.ones(4))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_adjoint_identity(k, rng):
    g = erdos_renyi(30, 0.2, seed=k)
    op = DifferenceOperator(g, k)
    for _ in range(100):
        x = rng.standard_normal(g.n)
        v = rng.standard_normal(op.rows)
        lhs, rhs = v @ op.apply(x), op.apply_transpose(v) @ x
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), np.linalg.norm(x) * np.linalg.norm(v))


def test_penalty_value_examples():
    assert penalty_value(DifferenceOperator(chain(3), 0), [0, 1, 3]) == 3
    assert penalty_value(DifferenceOperator(grid2d(3, 3), 2), np.full(9, -2.0)) == pytest.approx(0, abs=1e-12)


def test_penalty_value_dense_oracle(rng):
    g = grid2d(3, 3)
    b = rng.standard_normal(9)
    ref = np.abs(dense_delta(g, 1) @ b).sum()
    assert penalty_value(DifferenceOperator(g, 1), b) == pytest.approx(ref, rel=1e-10)


def test_elementwise_star():
    g = star(3)
    b = np.array([0.0, 1, 1, 1])
    assert elementwise_penalty(g, 1, b) == pytest.approx(6.0)
    assert np.abs(dense_delta(g, 1) @ b).sum() == pytest.approx(6.0)


def test_elementwise_constant_zero():
    assert elementwise_penalty(grid2d(3, 3), 0, np.ones(9)) == 0


def test_elementwise_restrictions():
    with pytest.raises(UnsupportedOrder):
        elementwise_penalty(chain(4), 3, np.ones(4))
    with pytest.raises(WeightedGraph):
        elementwise_penalty(build_graph(2, [(0, 1, 2.0)]), 0, np.ones(2))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_elementwise_matches_operator(k, rng):
    graphs = [grid2d(3, 3)] + [erdos_renyi(12, 0.3, seed=s) for s in range(3)]
    for g in graphs:
        Dk = dense_delta(g, k)
        for _ in range(100):
            b = rng.standard_normal(g.n)
            ref = np.abs(Dk @ b).sum()
            assert abs(elementwise_penalty(g, k, b) - ref) <= 1e-10 * max(1.0, ref)


def test_univariate_examples():
    assert univariate_difference_operator(4, 0).toarray().tolist() == [
        [-1, 1, 0, 0],
        [0, -1, 1, 0],
        [0, 0, -1, 1],
    ]
    D1a = univariate_difference_operator(3, 0).toarray()
    D1b = univariate_difference_operator(4, 0).toarray()
    assert univariate_difference_operator(4, 1).toarray().tolist() == (D1a @ D1b).tolist()
    assert (D1a @ D1b).tolist() == [[1, -2, 1, 0], [0, 1, -2, 1]]


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_univariate_annihilates_polynomials(k):
    t = np.arange(1.0, 21.0)
    D = univariate_difference_operator(20, k).toarray()
    for deg in range(k + 1):
        np.testing.assert_allclose(D @ t**deg, 0, atol=1e-8)
    assert np.abs(D @ t ** (k + 1)).min() >= 1


def test_boundary_trim_examples():
    assert boundary_trim(chain(5), 0) == []
    rows = boundary_trim(chain(6), 1)
    assert rows == [0, 5]
    rows = boundary_trim(chain(8), 2)
    assert rows == [0, 6]
    with pytest.raises(NotAChain):
        boundary_trim(grid2d(2, 2), 0)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_chain_reduction_exact(k):
    n = 12
    g = chain(n)
    full = DifferenceOperator(g, k).toarray()
    keep = [r for r in range(full.shape[0]) if r not in set(boundary_trim(g, k))]
    uni = univariate_difference_operator(n, k).toarray()
    assert np.array_equal(full[keep], boundary_sign(k) * uni)


@st.composite
def small_graph_and_order(draw):
    g = draw(random_graphs(max_n=10))
    return g, draw(st.integers(0, 4))


@given(small_graph_and_order(), st.integers(0, 2**32 - 1))
def test_factored_apply_matches_dense(gk, seed):
    g, k = gk
    op = DifferenceOperator(g, k)
    M = dense_delta(g, k)
    x = np.random.default_rng(seed).standard_normal(g.n)
    ref = M @ x
    np.testing.assert_allclose(op.apply(x), ref, rtol=1e-10, atol=1e-10 * max(1, np.abs(ref).max(initial=0)))
    v = np.random.default_rng(seed + 1).standard_normal(op.rows)
    ref = M.T @ v
    np.testing.assert_allclose(op.apply_transpose(v), ref, rtol=1e-10, atol=1e-10 * max(1, np.abs(ref).max(initial=0)))


@given(small_graph_and_order())
def test_null_space_dimension_is_component_count(gk):
    g, k = gk
    M = DifferenceOperator(g, k).toarray()
    s = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    rank = int(np.sum(s > 1e-10 * s.max())) if s.size and s.max() > 0 else 0
    assert g.n - rank == bfs_components(g.n, graph_edges(g))[1]


@pytest.mark.parametrize("k", [0, 1, 2])
def test_pseudoinverse_penrose_axioms(k):
    for g in (grid2d(4, 5), erdos_renyi(25, 0.2, seed=3), build_graph(5, [(0, 1), (3, 4, 2.0)])):
        A = DifferenceOperator(g, k).toarray()
        P = pseudoinverse(DifferenceOperator(g, k))
        scale = max(1.0, np.abs(A).max(), np.abs(P).max())
        np.testing.assert_allclose(A @ P @ A, A, atol=1e-8 * scale)
        np.testing.assert_allclose(P @ A @ P, P, atol=1e-8 * scale)


def test_pinv_two_node():
    # pinv((-1, 1)) = (-1/2, 1/2)^T, whose single column has norm 1/sqrt(2)
    P = pseudoinverse(DifferenceOperator(chain(2), 0))
    np.testing.assert_allclose(P.ravel(), [-0.5, 0.5])
    assert max_column_norm_pinv(DifferenceOperator(chain(2), 0)) == pytest.approx(np.sqrt(0.5), rel=1e-14)


def test_pinv_column_norm_growth():
    M = [max_column_norm_pinv(DifferenceOperator(chain(n), 0)) for n in (16, 32, 64)]
    slope = np.polyfit(np.log([16, 32, 64]), np.log(M), 1)[0]
    assert abs(slope - 0.5) < 0.1


@pytest.mark.parametrize("k", [0, 1, 2])
def test_pinv_crude_bound(k):
    for g in (chain(20), grid2d(4, 4), erdos_renyi(20, 0.3, seed=1)):
        op = DifferenceOperator(g, k)
        s = singular_values(op)
        smin = s[s > 1e-10 * s.max()].min()
        assert max_column_norm_pinv(op) <= 1.0 / smin * (1 + 1e-12)


def test_pinv_iterative_matches_dense():
    op = DifferenceOperator(grid2d(5, 5), 1)
    assert max_column_norm_pinv(op, method="iterative") == pytest.approx(max_column_norm_pinv(op), rel=1e-6)


def test_dense_size_guard():
    with pytest.raises(TooLarge):
        pseudoinverse(DifferenceOperator(chain(600), 0))


def test_graph_difference_operator_alias():
    op = graph_difference_operator(chain(4), 2)
    assert isinstance(op, DifferenceOperator) and op.k == 2
