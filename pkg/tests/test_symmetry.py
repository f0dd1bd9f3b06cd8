import pytest

from blockdiff.graph import orbit_partition
from blockdiff.symmetry import augmented_cycle, candidate_pairs, symmetry_witness


def test_candidates_form_one_orbit():
    part = orbit_partition(augmented_cycle())
    pairs = candidate_pairs()
    assert len(pairs) == 8
    assert set(pairs) <= set(part.edge_orbit_of(pairs[0]))


@pytest.mark.parametrize("backbone", ["hybrid", "ppgn", "transformer"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_equal_logits_on_equivalent_edges(backbone, seed):
    w = symmetry_witness(seed=seed, backbone=backbone)
    assert w.single_orbit
    assert w.spread < 1e-10
    assert w.collision


def test_target_needs_two_outcomes():
    w = symmetry_witness()
    present = set(w.target_present)
    assert present < set(w.candidates)
    assert 0 < len(present) < len(w.candidates)
    # each new node attaches to exactly one cycle node
    assert sorted(j for j, _ in present) == [5, 6]
