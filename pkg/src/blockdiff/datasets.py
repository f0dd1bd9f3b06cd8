"""Synthetic graph families and a density-matched Erdős–Rényi baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import LabeledGraph, is_connected

KINDS = ("community", "caveman", "grid")
MAX_RESAMPLE = 1000


class DatasetError(ValueError):
    pass


@dataclass
class CommunityParams:
    size_min: int = 6
    size_max: int = 10
    p_in: float = 0.7
    inter_fraction: float = 0.05  # inter-community edges per node
    min_inter: int = 1

    def validate(self):
        if not 1 <= self.size_min <= self.size_max:
            raise DatasetError("community sizes need 1 <= size_min <= size_max")
        if not 0.0 <= self.p_in <= 1.0 or self.inter_fraction < 0 or self.min_inter < 0:
            raise DatasetError("community probabilities must lie in [0, 1] and counts be >= 0")


@dataclass
class CavemanParams:
    cliques_min: int = 2
    cliques_max: int = 4
    clique_size_min: int = 4
    clique_size_max: int = 6
    rewire: float = 0.0  # probability of moving each intra-clique edge

    def validate(self):
        if not 2 <= self.cliques_min <= self.cliques_max:
            raise DatasetError("caveman needs 2 <= cliques_min <= cliques_max")
        if not 2 <= self.clique_size_min <= self.clique_size_max:
            raise DatasetError("caveman needs 2 <= clique_size_min <= clique_size_max")
        if not 0.0 <= self.rewire <= 1.0:
            raise DatasetError("rewire probability must lie in [0, 1]")


@dataclass
class GridParams:
    side_min: int = 3
    side_max: int = 6

    def validate(self):
        if not 1 <= self.side_min <= self.side_max:
            raise DatasetError("grid needs 1 <= side_min <= side_max")


def _from_adjacency(adj: np.ndarray) -> LabeledGraph:
    adj = np.asarray(adj, dtype=np.int64)
    return LabeledGraph(np.zeros(adj.shape[0], dtype=np.int64), adj)


def community_graph(rng: np.random.Generator, p: CommunityParams | None = None) -> LabeledGraph:
    """Two dense Erdős–Rényi communities joined by a few random edges.

    Resampled until connected whenever at least one inter edge is requested.
    """
    p = p or CommunityParams()
    p.validate()
    for _ in range(MAX_RESAMPLE):
        n1, n2 = (int(x) for x in rng.integers(p.size_min, p.size_max + 1, size=2))
        n = n1 + n2
        adj = np.zeros((n, n), dtype=np.int64)
        for lo, hi in ((0, n1), (n1, n)):
            m = hi - lo
            block = np.triu(rng.random((m, m)) < p.p_in, 1)
            adj[lo:hi, lo:hi] = block | block.T
        k = max(p.min_inter, int(round(p.inter_fraction * n)))
        cross = rng.choice(n1 * n2, size=min(k, n1 * n2), replace=False)
        for c in cross:
            i, j = int(c // n2), n1 + int(c % n2)
            adj[i, j] = adj[j, i] = 1
        g = _from_adjacency(adj)
        if k == 0 or is_connected(g):
            return g
    raise DatasetError("could not draw a connected community graph; raise p_in")


def caveman_graph(rng: np.random.Generator, p: CavemanParams | None = None, cliques: int | None = None,
                  clique_size: int | None = None) -> LabeledGraph:
    """Cliques joined by one bridge per adjacent pair (a chain for 2 cliques, a ring otherwise)."""
    p = p or CavemanParams()
    p.validate()
    c = cliques if cliques is not None else int(rng.integers(p.cliques_min, p.cliques_max + 1))
    k = clique_size if clique_size is not None else int(rng.integers(p.clique_size_min, p.clique_size_max + 1))
    if c < 2 or k < 2:
        raise DatasetError("caveman needs at least 2 cliques of size >= 2")
    for _ in range(MAX_RESAMPLE):
        n = c * k
        adj = np.zeros((n, n), dtype=np.int64)
        for q in range(c):
            adj[q * k:(q + 1) * k, q * k:(q + 1) * k] = 1
        np.fill_diagonal(adj, 0)
        pairs = [(q, q + 1) for q in range(c - 1)] + ([(c - 1, 0)] if c > 2 else [])
        for a, b in pairs:
            i, j = a * k + k - 1, b * k
            adj[i, j] = adj[j, i] = 1
        if p.rewire > 0:
            for i, j in zip(*np.nonzero(np.triu(adj, 1))):
                if i // k == j // k and rng.random() < p.rewire:
                    free = np.flatnonzero((adj[i] == 0) & (np.arange(n) != i))
                    if len(free):
                        w = int(rng.choice(free))
                        adj[i, j] = adj[j, i] = 0
                        adj[i, w] = adj[w, i] = 1
        g = _from_adjacency(adj)
        if is_connected(g):
            return g
    raise DatasetError("could not draw a connected caveman graph; lower the rewire probability")


def grid_graph(width: int, height: int) -> LabeledGraph:
    n = width * height
    adj = np.zeros((n, n), dtype=np.int64)
    for r in range(height):
        for c in range(width):
            v = r * width + c
            if c + 1 < width:
                adj[v, v + 1] = adj[v + 1, v] = 1
            if r + 1 < height:
                adj[v, v + width] = adj[v + width, v] = 1
    return _from_adjacency(adj)


def generate_dataset(kind: str, count: int, rng: np.random.Generator, params=None) -> list[LabeledGraph]:
    if count < 0:
        raise DatasetError("count must be >= 0")
    if kind == "community":
        return [community_graph(rng, params) for _ in range(count)]
    if kind == "caveman":
        return [caveman_graph(rng, params) for _ in range(count)]
    if kind == "grid":
        p = params or GridParams()
        p.validate()
        out = []
        for _ in range(count):
            w, h = (int(x) for x in rng.integers(p.side_min, p.side_max + 1, size=2))
            out.append(grid_graph(w, h))
        return out
    raise DatasetError(f"unknown dataset kind {kind!r}; choose from {KINDS}")


def erdos_renyi_baseline(reference: list[LabeledGraph], count: int, rng: np.random.Generator) -> list[LabeledGraph]:
    """G(n, p) graphs whose n and edge density copy randomly chosen reference graphs."""
    if not reference:
        raise DatasetError("reference set is empty")
    out = []
    for _ in range(count):
        ref = reference[int(rng.integers(len(reference)))]
        n = ref.n
        density = ref.num_edges / max(n * (n - 1) / 2, 1)
        upper = np.triu(rng.random((n, n)) < density, 1)
        out.append(_from_adjacency(upper | upper.T))
    return out


def split(graphs: list, rng: np.random.Generator, test_fraction: float = 0.2, val_fraction: float = 0.2):
    """Shuffle, then split into (train, validation, test); validation is carved out of train."""
    order = rng.permutation(len(graphs))
    n_test = int(round(test_fraction * len(graphs)))
    test = [graphs[i] for i in order[:n_test]]
    rest = [graphs[i] for i in order[n_test:]]
    n_val = int(round(val_fraction * len(rest)))
    return rest[n_val:], rest[:n_val], test
