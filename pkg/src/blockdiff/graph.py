"""Labeled undirected graphs, permutation actions and brute-force symmetry tools."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_AUTOMORPHISM_CAP = 10


class GraphError(ValueError):
    pass


@dataclass(eq=False)
class LabeledGraph:
    """Dense categorical graph.

    ``edge_labels[i, j] == 0`` means there is no edge between ``i`` and ``j``.
    The matrix must be symmetric with a zero diagonal.
    """

    node_labels: np.ndarray
    edge_labels: np.ndarray
    k_v: int = 1
    k_e: int = 2

    def __post_init__(self):
        self.node_labels = np.asarray(self.node_labels, dtype=np.int64).reshape(-1)
        n = self.node_labels.shape[0]
        self.edge_labels = np.asarray(self.edge_labels, dtype=np.int64).reshape(n, n)
        self.node_labels.setflags(write=False)
        self.edge_labels.setflags(write=False)
        if self.k_v < 1 or self.k_e < 2:
            raise GraphError(f"vocabulary sizes must satisfy k_v >= 1, k_e >= 2 (got {self.k_v}, {self.k_e})")
        if n and (self.node_labels.min() < 0 or self.node_labels.max() >= self.k_v):
            raise GraphError(f"node label outside [0, {self.k_v})")
        if n and (self.edge_labels.min() < 0 or self.edge_labels.max() >= self.k_e):
            raise GraphError(f"edge label outside [0, {self.k_e})")
        if not np.array_equal(self.edge_labels, self.edge_labels.T):
            raise GraphError("edge_labels must be symmetric (undirected graphs only)")
        if n and np.any(np.diag(self.edge_labels) != 0):
            raise GraphError("self-loops are not allowed; diagonal must be 0")

    @property
    def n(self) -> int:
        return int(self.node_labels.shape[0])

    @property
    def adjacency(self) -> np.ndarray:
        return (self.edge_labels != 0).astype(np.int64)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.edge_labels, 1)))

    def edge_list(self) -> list[tuple[int, int, int]]:
        i, j = np.nonzero(np.triu(self.edge_labels, 1))
        return [(int(a), int(b), int(self.edge_labels[a, b])) for a, b in zip(i, j)]

    def neighbors(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.edge_labels[v])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return (
            self.k_v == other.k_v
            and self.k_e == other.k_e
            and np.array_equal(self.node_labels, other.node_labels)
            and np.array_equal(self.edge_labels, other.edge_labels)
        )

    def __repr__(self) -> str:
        return f"LabeledGraph(n={self.n}, edges={self.num_edges}, k_v={self.k_v}, k_e={self.k_e})"

    @classmethod
    def from_edges(cls, n: int, edges: Sequence, node_labels=None, k_v: int = 1, k_e: int = 2) -> "LabeledGraph":
        """Build from ``(i, j)`` or ``(i, j, label)`` tuples; missing labels default to 1."""
        e = np.zeros((n, n), dtype=np.int64)
        for edge in edges:
            i, j = int(edge[0]), int(edge[1])
            lab = int(edge[2]) if len(edge) > 2 else 1
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            e[i, j] = e[j, i] = lab
        if node_labels is None:
            node_labels = np.zeros(n, dtype=np.int64)
        return cls(np.asarray(node_labels), e, k_v=k_v, k_e=k_e)

    @classmethod
    def empty(cls, k_v: int = 1, k_e: int = 2) -> "LabeledGraph":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 0), dtype=np.int64), k_v=k_v, k_e=k_e)


@dataclass(frozen=True)
class Permutation:
    """Bijection on ``{0..n-1}``; node ``i`` is sent to position ``mapping[i]``."""

    mapping: tuple[int, ...] = field()

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        object.__setattr__(self, "mapping", m)
        if sorted(m) != list(range(len(m))):
            raise GraphError(f"not a permutation: {m}")

    @property
    def n(self) -> int:
        return len(self.mapping)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.int64)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(rng.permutation(n).tolist()))

    def inverse(self) -> "Permutation":
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.array] = np.arange(self.n)
        return Permutation(tuple(inv.tolist()))

    def compose(self, other: "Permutation") -> "Permutation":
        """``self`` after ``other``: i -> self(other(i))."""
        return Permutation(tuple(self.mapping[j] for j in other.mapping))

    def apply_to_vector(self, values) -> np.ndarray:
        """Move entry ``i`` of a per-node vector to position ``mapping[i]``."""
        values = np.asarray(values)
        out = np.empty_like(values)
        out[self.array] = values
        return out

    def __call__(self, i: int) -> int:
        return self.mapping[i]


def apply_permutation(g: LabeledGraph, p: Permutation) -> LabeledGraph:
    if p.n != g.n:
        raise GraphError(f"permutation size {p.n} does not match graph size {g.n}")
    inv = p.inverse().array
    return LabeledGraph(g.node_labels[inv], g.edge_labels[np.ix_(inv, inv)], k_v=g.k_v, k_e=g.k_e)


def induced_subgraph(g: LabeledGraph, nodes: Sequence[int]) -> LabeledGraph:
    idx = [int(v) for v in nodes]
    if len(set(idx)) != len(idx):
        raise GraphError(f"duplicate node indices in {idx}")
    if any(v < 0 or v >= g.n for v in idx):
        raise GraphError(f"node index out of range for graph of size {g.n}: {idx}")
    idx = np.asarray(idx, dtype=np.int64)
    return LabeledGraph(g.node_labels[idx], g.edge_labels[np.ix_(idx, idx)], k_v=g.k_v, k_e=g.k_e)


def connected_components(g: LabeledGraph) -> list[list[int]]:
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        queue, comp = deque([s]), [s]
        while queue:
            v = queue.popleft()
            for u in g.neighbors(v):
                if not seen[u]:
                    seen[u] = True
                    comp.append(int(u))
                    queue.append(int(u))
        comps.append(sorted(comp))
    return comps


def is_connected(g: LabeledGraph) -> bool:
    return g.n > 0 and len(connected_components(g)) == 1


def enumerate_automorphisms(g: LabeledGraph, max_n: int = DEFAULT_AUTOMORPHISM_CAP) -> list[Permutation]:
    """All label-preserving automorphisms, by backtracking with degree pruning."""
    if g.n > max_n:
        raise GraphError(
            f"automorphism search is factorial; graph has {g.n} nodes, cap is {max_n} "
            f"(raise it with max_n / --aut-cap if you really need this)"
        )
    n = g.n
    E = g.edge_labels
    labels = g.node_labels
    deg = g.degrees
    # a node may only map to nodes of identical label and degree
    candidates = [[u for u in range(n) if labels[u] == labels[v] and deg[u] == deg[v]] for v in range(n)]
    found: list[Permutation] = []
    sigma = [-1] * n
    used = [False] * n

    def extend(v: int):
        if v == n:
            found.append(Permutation(tuple(sigma)))
            return
        for u in candidates[v]:
            if used[u]:
                continue
            if all(E[v, w] == E[u, sigma[w]] for w in range(v)):
                sigma[v] = u
                used[u] = True
                extend(v + 1)
                used[u] = False
        sigma[v] = -1

    extend(0)
    return found


@dataclass
class OrbitPartition:
    node_orbits: list[list[int]]
    edge_orbits: list[list[tuple[int, int]]]

    def node_orbit_of(self, v: int) -> list[int]:
        return next(o for o in self.node_orbits if v in o)

    def edge_orbit_of(self, pair: tuple[int, int]) -> list[tuple[int, int]]:
        pair = (int(pair[0]), int(pair[1]))
        return next(o for o in self.edge_orbits if pair in o)


def orbit_partition(g: LabeledGraph, max_n: int = DEFAULT_AUTOMORPHISM_CAP) -> OrbitPartition:
    auts = enumerate_automorphisms(g, max_n=max_n)
    n = g.n

    node_orbits, seen = [], set()
    for v in range(n):
        if v in seen:
            continue
        orbit = sorted({s(v) for s in auts})
        seen.update(orbit)
        node_orbits.append(orbit)

    edge_orbits, seen_pairs = [], set()
    for i in range(n):
        for j in range(n):
            if (i, j) in seen_pairs:
                continue
            orbit = sorted({(s(i), s(j)) for s in auts})
            seen_pairs.update(orbit)
            edge_orbits.append(orbit)
    return OrbitPartition(node_orbits, edge_orbits)


def is_isomorphic(g: LabeledGraph, h: LabeledGraph, max_n: int = DEFAULT_AUTOMORPHISM_CAP) -> bool:
    """Brute-force labeled isomorphism test for small graphs."""
    if g.n != h.n or g.num_edges != h.num_edges:
        return False
    if g.n > max_n:
        raise GraphError(f"isomorphism brute force capped at {max_n} nodes (got {g.n})")
    if sorted(g.degrees.tolist()) != sorted(h.degrees.tolist()):
        return False
    if sorted(g.node_labels.tolist()) != sorted(h.node_labels.tolist()):
        return False
    n = g.n
    cand = [
        [u for u in range(n) if h.node_labels[u] == g.node_labels[v] and h.degrees[u] == g.degrees[v]]
        for v in range(n)
    ]
    sigma = [-1] * n
    used = [False] * n

    def extend(v: int) -> bool:
        if v == n:
            return True
        for u in cand[v]:
            if used[u]:
                continue
            if all(g.edge_labels[v, w] == h.edge_labels[u, sigma[w]] for w in range(v)):
                sigma[v] = u
                used[u] = True
                if extend(v + 1):
                    return True
                used[u] = False
        return False

    return extend(0)


def hop_counts(g: LabeledGraph, k_hops: int) -> np.ndarray:
    """(n, k_hops) matrix; entry [v, k-1] counts nodes at shortest-path distance exactly k."""
    n = g.n
    out = np.zeros((n, max(k_hops, 0)), dtype=np.int64)
    if k_hops <= 0:
        return out
    nbrs = [g.neighbors(v) for v in range(n)]
    for s in range(n):
        dist = np.full(n, -1)
        dist[s] = 0
        frontier = [s]
        k = 0
        while frontier and k < k_hops:
            k += 1
            nxt = []
            for v in frontier:
                for u in nbrs[v]:
                    if dist[u] < 0:
                        dist[u] = k
                        nxt.append(u)
            out[s, k - 1] = len(nxt)
            frontier = nxt
    return out
