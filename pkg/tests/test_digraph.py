import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etconsensus import (
    Digraph,
    NoSpanningTree,
    NotStronglyConnected,
    condense,
    gramians,
    has_spanning_tree,
    is_strongly_connected,
    laplacian,
    left_eigenvector,
)
from etconsensus.digraph import strongly_connected_components

from oracles import all_digraphs, brute_sccs, brute_spanning_tree, brute_strongly_connected, random_strongly_connected

CYCLE3 = Digraph.from_edges(3, [(0, 2), (1, 0), (2, 1)])  # each agent receives from its predecessor
CHAIN3 = Digraph.from_edges(3, [(1, 0), (2, 1)])  # 3 <- 2 <- 1
CYCLE2 = Digraph.from_edges(2, [(0, 1), (1, 0)])


def test_laplacian_examples():
    np.testing.assert_array_equal(laplacian(CYCLE3), [[1, 0, -1], [-1, 1, 0], [0, -1, 1]])
    cyc = Digraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    np.testing.assert_array_equal(laplacian(cyc), [[1, -1, 0], [0, 1, -1], [-1, 0, 1]])
    np.testing.assert_array_equal(laplacian(Digraph(np.zeros((4, 4)))), np.zeros((4, 4)))
    np.testing.assert_array_equal(laplacian(Digraph.from_edges(2, [(0, 1)])), [[1, -1], [0, 0]])


def test_rejects_bad_adjacency():
    with pytest.raises(ValueError, match="0 or 1"):
        Digraph(np.array([[0, 2], [1, 0]]))
    with pytest.raises(ValueError, match="diagonal"):
        Digraph(np.eye(2))
    with pytest.raises(ValueError, match="duplicate"):
        Digraph.from_edges(2, [(0, 1), (0, 1)])
    with pytest.raises(ValueError, match="out of range"):
        Digraph.from_edges(2, [(0, 2)])


def test_digraph_is_immutable():
    with pytest.raises(ValueError):
        CYCLE3.adjacency[0, 1] = 1


def test_connectivity_examples():
    assert has_spanning_tree(CYCLE3) and is_strongly_connected(CYCLE3)
    assert not has_spanning_tree(Digraph(np.zeros((2, 2))))
    assert has_spanning_tree(CHAIN3) and not is_strongly_connected(CHAIN3)
    assert is_strongly_connected(Digraph(np.zeros((1, 1))))


@pytest.mark.parametrize("n", [2, 3])
def test_spanning_tree_exhaustive(n):
    for a in all_digraphs(n):
        g = Digraph(a)
        assert has_spanning_tree(g) == brute_spanning_tree(a)
        assert is_strongly_connected(g) == brute_strongly_connected(a)


def test_spanning_tree_sampled_n4():
    rng = np.random.default_rng(4)
    for _ in range(1500):
        a = (rng.random((4, 4)) < rng.uniform(0.1, 0.6)).astype(float)
        np.fill_diagonal(a, 0)
        assert has_spanning_tree(Digraph(a)) == brute_spanning_tree(a)


def test_scc_partition_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        a = (rng.random((n, n)) < 0.25).astype(float)
        np.fill_diagonal(a, 0)
        ours = sorted(strongly_connected_components(Digraph(a)))
        assert ours == sorted(brute_sccs(a))


def test_condense_strongly_connected_is_single_block():
    dec = condense(CYCLE3)
    assert dec.K == 1 and dec.permutation == (0, 1, 2)
    np.testing.assert_array_equal(dec.h_diag[0], 0)


def test_condense_chain():
    dec = condense(CHAIN3)
    assert dec.block_sizes == (1, 1, 1)
    assert dec.members(dec.closed_scc_index) == (0,)
    assert dec.permutation == (2, 1, 0)
    for k in range(3):
        np.testing.assert_array_equal(dec.xi[k], [1.0])
        np.testing.assert_array_equal(dec.tilde_blocks[k], [[0.0]])


def test_condense_two_cycle_fed_by_three_cycle():
    # agents 0,1 form a 2-cycle receiving from the 3-cycle 2 -> 3 -> 4 -> 2
    g = Digraph.from_edges(5, [(0, 1), (1, 0), (0, 2), (3, 2), (4, 3), (2, 4)])
    dec = condense(g)
    assert dec.block_sizes == (2, 3)
    assert np.any(dec.block(0, 1) != 0)
    assert dec.members(1) == (2, 3, 4)
    np.testing.assert_array_equal(dec.h_diag[0], [1, 0])
    np.testing.assert_array_equal(dec.h_diag[1], 0)


def test_condense_requires_spanning_tree():
    with pytest.raises(NoSpanningTree):
        condense(Digraph.from_edges(3, [(2, 0), (2, 1)]))


def test_tie_break_by_smallest_agent():
    # agents 1 and 2 both hang directly off root 0: same depth, ordered 1 then 2
    dec = condense(Digraph.from_edges(3, [(2, 0), (1, 0)]))
    assert dec.permutation == (1, 2, 0)


def _random_spanning_tree(rng, n):
    order = rng.permutation(n)
    a = np.zeros((n, n))
    for k in range(1, n):
        a[order[k], order[rng.integers(0, k)]] = 1
    extra = rng.random((n, n)) < 0.3
    a[extra] = 1
    np.fill_diagonal(a, 0)
    return a


def test_decomposition_invariants():
    rng = np.random.default_rng(3)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        g = Digraph(_random_spanning_tree(rng, n))
        if not has_spanning_tree(g):
            continue
        dec = condense(g)
        o = dec.offsets
        # block upper triangular: below-diagonal blocks exactly zero
        for k in range(dec.K):
            assert np.all(dec.reordered[o[k + 1]:, o[k]:o[k + 1]] == 0)
            if k < dec.K - 1:
                assert np.any(dec.reordered[o[k]:o[k + 1], o[k + 1]:] != 0)
            xi = dec.xi[k]
            assert np.all(xi > 0) and abs(xi.sum() - 1) < 1e-12
            assert np.abs(xi @ dec.tilde_blocks[k]).max() <= 1e-10
            assert np.all(dec.h_diag[k] >= 0)
            if k < dec.K - 1:
                assert np.any(dec.h_diag[k] > 0)
            np.testing.assert_array_equal(dec.block(k, k), dec.tilde_blocks[k] + np.diag(dec.h_diag[k]))
            assert is_strongly_connected(g.subgraph(dec.members(k)))
        np.testing.assert_array_equal(dec.h_diag[-1], 0)
        # reordering the reordered graph changes nothing
        again = condense(g.subgraph(dec.permutation))
        assert again.permutation == tuple(range(n))
        np.testing.assert_array_equal(again.reordered, dec.reordered)


def test_left_eigenvector_examples():
    np.testing.assert_allclose(left_eigenvector(laplacian(CYCLE3)), [1 / 3] * 3, atol=1e-14)
    np.testing.assert_array_equal(left_eigenvector(np.zeros((1, 1))), [1.0])
    np.testing.assert_allclose(left_eigenvector(np.array([[1.0, -1], [-1, 1]])), [0.5, 0.5], atol=1e-14)


def test_left_eigenvector_rejects_non_simple_zero():
    with pytest.raises(NotStronglyConnected):
        left_eigenvector(np.zeros((2, 2)))
    with pytest.raises(NotStronglyConnected):
        left_eigenvector(laplacian(CHAIN3))


def test_gramians_examples():
    gm = gramians(CYCLE3)
    expected = np.array([[1, -0.5, -0.5], [-0.5, 1, -0.5], [-0.5, -0.5, 1]]) / 3
    np.testing.assert_allclose(gm.R, expected, atol=1e-14)
    np.testing.assert_allclose(gramians(CYCLE2).U, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)
    with pytest.raises(NotStronglyConnected):
        gramians(CHAIN3)


def test_lemma1_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        gm = gramians(Digraph(random_strongly_connected(rng, n)))
        assert np.allclose(gm.R, gm.R.T) and np.allclose(gm.U, gm.U.T)
        assert np.abs(gm.R.sum(axis=1)).max() <= 1e-12
        lam = np.linalg.eigvalsh(gm.R)
        assert lam[0] >= -1e-9 and lam[1] > 1e-9
        assert np.linalg.eigvalsh(gm.R - gm.lambda2 / gm.mu_m * gm.U)[0] >= -1e-9


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
def test_quadratic_identity(seed, n):
    rng = np.random.default_rng(seed)
    gm = gramians(Digraph(random_strongly_connected(rng, n)))
    x = rng.uniform(-10, 10, n)
    dev = x - (gm.xi @ x)
    lhs = dev @ np.diag(gm.xi) @ dev
    rhs = x @ gm.U @ x
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1e-300) + 1e-13
