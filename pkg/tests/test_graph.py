import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockdiff.graph import (
    GraphError,
    LabeledGraph,
    Permutation,
    apply_permutation,
    connected_components,
    enumerate_automorphisms,
    hop_counts,
    induced_subgraph,
    orbit_partition,
)


def cycle(n):
    return LabeledGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star(leaves):
    return LabeledGraph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


@st.composite
def graphs(draw, max_n=7, k_v=3, k_e=3):
    n = draw(st.integers(0, max_n))
    nodes = draw(st.lists(st.integers(0, k_v - 1), min_size=n, max_size=n))
    upper = draw(st.lists(st.integers(0, k_e - 1), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    e = np.zeros((n, n), dtype=np.int64)
    e[np.triu_indices(n, 1)] = upper
    return LabeledGraph(nodes, e + e.T, k_v=k_v, k_e=k_e)


def brute_automorphisms(g):
    return {
        p for p in itertools.permutations(range(g.n))
        if apply_permutation(g, Permutation(p)) == g
    }


class TestLabeledGraph:
    def test_rejects_asymmetric(self):
        with pytest.raises(GraphError, match="symmetric"):
            LabeledGraph([0, 0], [[0, 1], [0, 0]])

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError, match="self-loop"):
            LabeledGraph([0, 0], [[1, 0], [0, 0]])

    def test_rejects_label_out_of_range(self):
        with pytest.raises(GraphError):
            LabeledGraph([0, 2], [[0, 0], [0, 0]], k_v=2)
        with pytest.raises(GraphError):
            LabeledGraph([0, 0], [[0, 2], [2, 0]], k_e=2)

    def test_arrays_read_only(self):
        g = cycle(4)
        with pytest.raises(ValueError):
            g.edge_labels[0, 1] = 0


class TestPermutation:
    def test_identity_is_noop(self):
        g = cycle(5)
        assert apply_permutation(g, Permutation.identity(5)) == g

    def test_swap_twice(self):
        g = LabeledGraph.from_edges(3, [(0, 1)], node_labels=[0, 1, 2], k_v=3)
        p = Permutation((1, 0, 2))
        assert apply_permutation(apply_permutation(g, p), p) == g

    def test_path_example_entrywise(self):
        # path 0-1-2 labelled a,b,c; permutation sends 0->2, 1->0, 2->1
        g = LabeledGraph.from_edges(3, [(0, 1), (1, 2)], node_labels=[0, 1, 2], k_v=3)
        p = Permutation((2, 0, 1))
        h = apply_permutation(g, p)
        inv = {2: 0, 0: 1, 1: 2}
        for i in range(3):
            assert h.node_labels[i] == g.node_labels[inv[i]]
            for j in range(3):
                assert h.edge_labels[i, j] == g.edge_labels[inv[i], inv[j]]
        assert h.node_labels.tolist() == [1, 2, 0]
        assert h.edge_list() == [(0, 1, 1), (0, 2, 1)]

    def test_size_mismatch(self):
        with pytest.raises(GraphError, match="size"):
            apply_permutation(cycle(4), Permutation.identity(3))

    def test_not_a_permutation(self):
        with pytest.raises(GraphError):
            Permutation((0, 0, 1))

    @given(graphs(), st.randoms(use_true_random=False))
    def test_inverse_round_trip(self, g, rnd):
        perm = list(range(g.n))
        rnd.shuffle(perm)
        p = Permutation(perm)
        assert apply_permutation(apply_permutation(g, p), p.inverse()) == g

    @given(st.integers(1, 7), st.randoms(use_true_random=False))
    def test_compose_matches_sequential_application(self, n, rnd):
        g = LabeledGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], node_labels=list(range(n)), k_v=n)
        a, b = list(range(n)), list(range(n))
        rnd.shuffle(a)
        rnd.shuffle(b)
        pa, pb = Permutation(a), Permutation(b)
        assert apply_permutation(apply_permutation(g, pb), pa) == apply_permutation(g, pa.compose(pb))


class TestInducedSubgraph:
    def test_full_set(self):
        g = cycle(4)
        assert induced_subgraph(g, range(4)) == g

    def test_empty_set(self):
        assert induced_subgraph(cycle(4), []).n == 0

    def test_cycle_pair(self):
        h = induced_subgraph(cycle(4), [0, 1])
        assert h.n == 2 and h.edge_list() == [(0, 1, 1)]

    def test_non_adjacent_pair(self):
        assert induced_subgraph(cycle(4), [0, 2]).num_edges == 0

    def test_errors(self):
        with pytest.raises(GraphError, match="duplicate"):
            induced_subgraph(cycle(4), [0, 0])
        with pytest.raises(GraphError, match="range"):
            induced_subgraph(cycle(4), [0, 4])


class TestAutomorphisms:
    def test_cycle_has_dihedral_group(self):
        auts = enumerate_automorphisms(cycle(4))
        assert len(auts) == 8
        assert {a.mapping for a in auts} == brute_automorphisms(cycle(4))

    def test_path_p3(self):
        g = LabeledGraph.from_edges(3, [(0, 1), (1, 2)])
        assert {a.mapping for a in enumerate_automorphisms(g)} == {(0, 1, 2), (2, 1, 0)}

    def test_distinct_labels_pin_nodes(self):
        g = LabeledGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], node_labels=[0, 1, 2, 3], k_v=4)
        assert [a.mapping for a in enumerate_automorphisms(g)] == [(0, 1, 2, 3)]

    def test_cap(self):
        with pytest.raises(GraphError, match="cap"):
            enumerate_automorphisms(cycle(11))

    @settings(max_examples=40, deadline=None)
    @given(graphs(max_n=6))
    def test_matches_brute_force_and_is_group(self, g):
        auts = {a.mapping for a in enumerate_automorphisms(g)}
        assert auts == brute_automorphisms(g)
        assert tuple(range(g.n)) in auts
        for a in auts:
            pa = Permutation(a)
            assert pa.inverse().mapping in auts
            for b in auts:
                assert pa.compose(Permutation(b)).mapping in auts


class TestOrbits:
    def test_cycle_single_node_orbit(self):
        assert orbit_partition(cycle(4)).node_orbits == [[0, 1, 2, 3]]

    def test_star_two_orbits(self):
        assert orbit_partition(star(4)).node_orbits == [[0], [1, 2, 3, 4]]

    def test_augmented_cycle_candidate_edges(self):
        g = LabeledGraph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 0)])
        cand = {(j, i) for i in range(4) for j in (4, 5)}
        assert cand <= set(orbit_partition(g).edge_orbit_of((4, 0)))

    @settings(max_examples=30, deadline=None)
    @given(graphs(max_n=6))
    def test_partitions_cover_everything_once(self, g):
        part = orbit_partition(g)
        nodes = [v for o in part.node_orbits for v in o]
        pairs = [p for o in part.edge_orbits for p in o]
        assert sorted(nodes) == list(range(g.n))
        assert sorted(pairs) == [(i, j) for i in range(g.n) for j in range(g.n)]

    @settings(max_examples=30, deadline=None)
    @given(graphs(max_n=6))
    def test_orbit_members_share_hop_profiles(self, g):
        hops = hop_counts(g, 3)
        for orbit in orbit_partition(g).node_orbits:
            for v in orbit:
                assert hops[v].tolist() == hops[orbit[0]].tolist()


class TestComponents:
    def test_empty(self):
        assert connected_components(LabeledGraph.empty()) == []

    def test_cycle(self):
        assert connected_components(cycle(4)) == [[0, 1, 2, 3]]

    def test_two_edges(self):
        g = LabeledGraph.from_edges(4, [(0, 2), (1, 3)])
        assert connected_components(g) == [[0, 2], [1, 3]]
