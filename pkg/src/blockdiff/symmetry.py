"""Why an equivariant denoiser cannot grow some blocks in one shot.

A 4-cycle prefix gets a new block of two nodes, each of which should attach to
exactly one cycle node. Every candidate edge between the new nodes and the
cycle lies in one automorphism orbit, so any equivariant network scores them
identically and cannot single out the two edges the target needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .graph import LabeledGraph, orbit_partition
from .model import Denoiser, DenoiserConfig
from .training import GraphView, collate

CYCLE = 4


def augmented_cycle() -> LabeledGraph:
    """4-cycle on nodes 0..3 plus two isolated new nodes 4, 5."""
    return LabeledGraph.from_edges(CYCLE + 2, [(i, (i + 1) % CYCLE) for i in range(CYCLE)])


def candidate_pairs() -> list[tuple[int, int]]:
    return [(j, i) for j in (CYCLE, CYCLE + 1) for i in range(CYCLE)]


@dataclass
class SymmetryWitness:
    candidates: list[tuple[int, int]]  # 1-based (new node, cycle node)
    logits: np.ndarray  # (8, k_e)
    spread: float
    single_orbit: bool
    target_present: list[tuple[int, int]]

    @property
    def collision(self) -> bool:
        return self.single_orbit and self.spread < 1e-10


def symmetry_witness(seed: int = 0, backbone: str = "hybrid", layers: int = 2) -> SymmetryWitness:
    g = augmented_cycle()
    part = orbit_partition(g)
    pairs = candidate_pairs()
    single_orbit = set(pairs) <= set(part.edge_orbit_of(pairs[0]))

    cfg = DenoiserConfig(layers=layers, node_dim=32, edge_dim=16, heads=4, backbone=backbone)
    model = Denoiser(cfg, seed=seed).double()
    view = GraphView(
        node_labels=np.asarray(g.node_labels),
        edge_labels=np.asarray(g.edge_labels),
        block_ids=np.array([1] * CYCLE + [2, 2]),
        degrees=np.array([2] * CYCLE + [1, 1]),
        virtual=np.array([0] * CYCLE + [1, 1]),
        t=1,
    )
    with torch.no_grad():
        out = model(collate([view]))
    logits = np.stack([out.edge_logits[0, j, i].numpy() for j, i in pairs])
    spread = float((logits.max(0) - logits.min(0)).max())
    return SymmetryWitness(
        candidates=[(j + 1, i + 1) for j, i in pairs],
        logits=logits,
        spread=spread,
        single_orbit=single_orbit,
        target_present=[(5, 1), (6, 3)],
    )
