"""Structural partial order: iterative peeling by multi-hop weighted degree.

Nodes are removed in rounds; each round removes every node of minimum
weighted degree in the residual graph. Blocks are numbered in reverse removal
order, so block 1 is the structural core and prefixes grow outward.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import LabeledGraph, connected_components, hop_counts, induced_subgraph

log = logging.getLogger(__name__)

DEFAULT_K_HOPS = 3


@dataclass
class BlockDecomposition:
    phi: np.ndarray  # 1-based block rank per node
    blocks: list[list[int]]
    k_hops: int
    # weighted degree each node had in the residual graph when it was removed
    removal_weight: list[int] | None = None

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> list[int]:
        return [len(b) for b in self.blocks]


def weighted_degree(g: LabeledGraph, k_hops: int) -> list[int]:
    """Hash of per-hop neighbour counts, lower hops most significant.

    Exact Python integers: with ``|V|`` as the radix the values reach
    ``|V|**k_hops``. ``k_hops == 0`` gives every node weight 1.
    """
    if k_hops < 0:
        raise ValueError("k_hops must be >= 0")
    if k_hops == 0:
        return [1] * g.n
    counts = hop_counts(g, k_hops)
    base = g.n
    out = []
    for row in counts:
        w = 0
        for k in range(k_hops):
            w = w * base + int(row[k])
        out.append(w)
    return out


def _peel(g: LabeledGraph, k_hops: int, static: bool) -> tuple[list[list[int]], list[int]]:
    """Removal rounds in removal order (first removed first)."""
    residual = list(range(g.n))
    rounds, weights = [], []
    static_w = weighted_degree(g, k_hops) if static else None
    while residual:
        if static:
            w = [static_w[v] for v in residual]
        else:
            w = weighted_degree(induced_subgraph(g, residual), k_hops)
        low = min(w)
        removed = [v for v, wv in zip(residual, w) if wv == low]
        rounds.append(removed)
        weights.append(low)
        keep = set(removed)
        residual = [v for v in residual if v not in keep]
    return rounds, weights


def structural_partial_order(g: LabeledGraph, k_hops: int = DEFAULT_K_HOPS, static: bool = False) -> BlockDecomposition:
    """Block decomposition of ``g``.

    ``static=True`` ranks by weighted degree on the original graph instead of
    recomputing it on the residual graph each round (ablation only).
    Disconnected inputs are peeled per component and merged core-first.
    """
    n = g.n
    if n == 0:
        return BlockDecomposition(np.zeros(0, dtype=np.int64), [], k_hops, [])
    comps = connected_components(g)
    if len(comps) == 1:
        rounds, weights = _peel(g, k_hops, static)
        blocks = [sorted(r) for r in reversed(rounds)]
        removal = [0] * n
        for r, w in zip(rounds, weights):
            for v in r:
                removal[v] = w
    else:
        log.warning("graph with %d nodes has %d components; peeling each separately", n, len(comps))
        per_comp = []
        removal = [0] * n
        for comp in comps:
            sub = induced_subgraph(g, comp)
            rounds, weights = _peel(sub, k_hops, static)
            per_comp.append([[comp[v] for v in r] for r in reversed(rounds)])
            for r, w in zip(rounds, weights):
                for v in r:
                    removal[comp[v]] = w
        depth = max(len(b) for b in per_comp)
        blocks = []
        for r in range(depth):
            merged = sorted(v for b in per_comp if r < len(b) for v in b[r])
            blocks.append(merged)
    phi = np.zeros(n, dtype=np.int64)
    for r, block in enumerate(blocks, start=1):
        phi[block] = r
    return BlockDecomposition(phi, blocks, k_hops, removal)


@dataclass
class Prefix:
    graph: LabeledGraph
    nodes: list[int]  # prefix-local index -> original index

    def local_index(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.nodes)}


def block_prefix_graphs(g: LabeledGraph, d: BlockDecomposition) -> list[Prefix]:
    """Induced subgraphs on the first 1..K_B blocks, nodes kept in original order."""
    out = []
    for i in range(1, d.num_blocks + 1):
        nodes = sorted(int(v) for v in np.flatnonzero(d.phi <= i))
        out.append(Prefix(induced_subgraph(g, nodes), nodes))
    return out


def block_degrees(g: LabeledGraph, d: BlockDecomposition) -> np.ndarray:
    """Degree of each node inside the prefix graph that introduced it."""
    adj = g.adjacency
    out = np.zeros(g.n, dtype=np.int64)
    for v in range(g.n):
        out[v] = int(adj[v, d.phi <= d.phi[v]].sum())
    return out


def block_degree_is_uniform(g: LabeledGraph, d: BlockDecomposition) -> bool:
    deg = block_degrees(g, d)
    return all(len(set(deg[b].tolist())) <= 1 for b in d.blocks)
