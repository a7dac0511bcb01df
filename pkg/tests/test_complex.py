import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgetsp.complex import (
    SimplicialComplex2,
    WeightedGraph,
    boundary_operators,
    clique_complex_order2,
    complete_graph,
    cycle_graph,
    threshold_top_fraction,
)

from builders import k3_unfilled, random_graph


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError, match="self-loops"):
        WeightedGraph(3, ((1, 1, 1.0),))
    with pytest.raises(ValueError, match="duplicate"):
        WeightedGraph(3, ((0, 1, 1.0), (0, 1, 2.0)))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 1, -1.0),))
    with pytest.raises(ValueError):
        WeightedGraph(3, ((0, 3, 1.0),))


class TestThreshold:
    def test_keeps_heaviest_fraction(self):
        edges = tuple((i, i + 1, float(w)) for i, w in zip(range(10), [5, 1, 9, 3, 7, 2, 8, 4, 6, 0.5]))
        g = WeightedGraph(11, edges)
        out = threshold_top_fraction(g, 0.2)
        assert out.n_edges == 2
        assert sorted(w for _, _, w in out.edges) == [8.0, 9.0]
        assert out.n_nodes == 11

    def test_fraction_one_is_identity(self):
        g = complete_graph(5, 2.0)
        assert threshold_top_fraction(g, 1.0).edges == g.edges

    def test_ties_prefer_lexicographically_smaller(self):
        g = WeightedGraph(4, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)))
        # ceil(0.4 * 5) = 2 edges; order (0,1) < (0,2) < (1,2) < ...
        out = threshold_top_fraction(g, 0.4)
        assert [(i, j) for i, j, _ in out.edges] == [(0, 1), (0, 2)]

    def test_empty_graph_errors(self):
        with pytest.raises(ValueError, match="no edges to threshold"):
            threshold_top_fraction(WeightedGraph(3), 0.5)

    def test_idempotent_at_fraction_one(self, rng):
        g = random_graph(rng, 12, 0.5)
        once = threshold_top_fraction(g, 0.3)
        assert threshold_top_fraction(once, 1.0) == once


class TestCliqueComplex:
    @pytest.mark.parametrize("n,n_tri", [(3, 1), (4, 4), (5, 10)])
    def test_complete_graphs(self, n, n_tri):
        k = clique_complex_order2(complete_graph(n))
        assert k.n_edges == n * (n - 1) // 2
        assert k.triangles == tuple(itertools.combinations(range(n), 3))
        assert k.n_triangles == n_tri

    def test_c4_has_no_triangles(self):
        k = clique_complex_order2(cycle_graph(4))
        assert k.n_edges == 4 and k.n_triangles == 0

    def test_matches_brute_force_triples(self, rng):
        for _ in range(20):
            g = random_graph(rng, 9, 0.5)
            present = {(i, j) for i, j, _ in g.edges}
            expected = [t for t in itertools.combinations(range(9), 3)
                        if {(t[0], t[1]), (t[0], t[2]), (t[1], t[2])} <= present]
            k = clique_complex_order2(g)
            assert list(k.triangles) == expected

    def test_closure_is_enforced(self):
        with pytest.raises(ValueError, match="missing face"):
            SimplicialComplex2(3, ((0, 1), (1, 2)), ((0, 1, 2),))

    def test_deterministic_index_maps(self, rng):
        g = random_graph(rng, 15, 0.4)
        a, b = clique_complex_order2(g), clique_complex_order2(g)
        assert a.edge_index == b.edge_index
        assert a.triangle_index == b.triangle_index
        assert list(a.edges) == sorted(a.edges)

    def test_json_roundtrip(self, tmp_path):
        k = clique_complex_order2(complete_graph(4))
        k.save(tmp_path / "k.json")
        data = json.loads((tmp_path / "k.json").read_text())
        assert set(data) == {"n_nodes", "edges", "triangles"}
        assert SimplicialComplex2.load(tmp_path / "k.json") == k


class TestBoundary:
    def test_single_edge(self):
        b = boundary_operators(SimplicialComplex2(2, ((0, 1),)))
        assert b.b1.toarray().tolist() == [[-1], [1]]
        assert b.b2.shape == (1, 0)

    def test_k3_triangle_column(self):
        b = boundary_operators(clique_complex_order2(complete_graph(3)))
        # edges (0,1), (0,2), (1,2): d(0,1,2) = (1,2) - (0,2) + (0,1)
        assert b.b2.toarray()[:, 0].tolist() == [1, -1, 1]

    def test_unfilled_k3_has_empty_b2(self):
        b = boundary_operators(k3_unfilled())
        assert b.b2.shape == (3, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(3, 14), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1))
    def test_boundary_of_boundary_is_zero(self, n, p, seed):
        g = random_graph(np.random.default_rng(seed), n, p)
        b = boundary_operators(clique_complex_order2(g))
        assert b.b1.dtype.kind == "i" and b.b2.dtype.kind == "i"
        prod = (b.b1 @ b.b2).toarray()
        assert not prod.any()
        b1 = b.b1.toarray()
        assert np.all(b1.sum(axis=0) == 0)
        assert np.all((b1 == 1).sum(axis=0) == 1) and np.all((b1 == -1).sum(axis=0) == 1)
        b2 = b.b2.toarray()
        assert np.all(b2.sum(axis=0) == 1)
        assert np.all(np.count_nonzero(b2, axis=0) == 3)

    def test_b1_orientation_low_to_high(self, rng):
        k = clique_complex_order2(random_graph(rng, 10, 0.5))
        b1 = boundary_operators(k).b1.toarray()
        for col, (i, j) in enumerate(k.edges):
            assert b1[i, col] == -1 and b1[j, col] == 1
