"""Graph statistics and squared MMD between sets of them."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .graph import LabeledGraph

CLUSTERING_BINS = 100
NUM_ORBITS = 11  # orbits 4..14 of the connected 4-node graphlets
STAT_KINDS = ("degree", "clustering", "orbit")


def degree_histogram(g: LabeledGraph) -> np.ndarray:
    """Counts of nodes per degree 0..max."""
    if g.n == 0:
        return np.zeros(1)
    return np.bincount(g.degrees).astype(np.float64)


def clustering_coefficients(g: LabeledGraph) -> np.ndarray:
    adj = g.adjacency.astype(np.float64)
    deg = adj.sum(1)
    tri = np.diag(adj @ adj @ adj) / 2.0
    pairs = deg * (deg - 1) / 2.0
    return np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)


def clustering_histogram(g: LabeledGraph, bins: int = CLUSTERING_BINS) -> np.ndarray:
    hist, _ = np.histogram(clustering_coefficients(g), bins=bins, range=(0.0, 1.0))
    return hist.astype(np.float64)


def _orbits_of_quad(adj: np.ndarray, quad) -> list[int] | None:
    """Orbit index (0..10 for orbits 4..14) of each node of a 4-subset, None if disconnected."""
    sub = adj[np.ix_(quad, quad)]
    m = int(sub.sum()) // 2
    deg = sub.sum(1)
    if m < 3:
        return None
    if m == 3:
        if deg.max() == 3:  # claw
            return [3 if d == 3 else 2 for d in deg]
        if (deg == 0).any():  # triangle plus isolated node
            return None
        return [1 if d == 2 else 0 for d in deg]  # path
    if m == 4:
        if deg.max() == 2:  # 4-cycle
            return [4] * 4
        return [5 if d == 1 else 7 if d == 3 else 6 for d in deg]  # paw
    if m == 5:
        return [9 if d == 3 else 8 for d in deg]  # diamond
    return [10] * 4  # K4


def orbit_counts(g: LabeledGraph) -> np.ndarray:
    """Per-node graphlet orbit participation (orbits 4..14), summed over nodes."""
    out = np.zeros(NUM_ORBITS)
    if g.n < 4:
        return out
    adj = g.adjacency
    for quad in combinations(range(g.n), 4):
        orbits = _orbits_of_quad(adj, list(quad))
        if orbits is not None:
            for o in orbits:
                out[o] += 1
    return out


def statistic(g: LabeledGraph, kind: str) -> np.ndarray:
    if kind == "degree":
        return degree_histogram(g)
    if kind == "clustering":
        return clustering_histogram(g)
    if kind == "orbit":
        return orbit_counts(g)
    raise ValueError(f"unknown statistic {kind!r}; choose from {STAT_KINDS}")


def _normalize(h: np.ndarray) -> np.ndarray:
    s = h.sum()
    return h / s if s > 0 else h


def _pad(hists, length):
    return np.stack([np.pad(h, (0, length - len(h))) for h in hists])


def mmd(set_a, set_b, bandwidth: float = 1.0, normalize: bool = True) -> float:
    """Biased squared MMD with kernel exp(-TV(a, b)^2 / bandwidth^2).

    Histograms of different lengths are zero-padded; with ``normalize`` each is
    rescaled to sum to one first.
    """
    if len(set_a) == 0 or len(set_b) == 0:
        raise ValueError("mmd needs two non-empty sets")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    length = max(len(h) for h in list(set_a) + list(set_b))
    prep = (lambda h: _normalize(np.asarray(h, dtype=np.float64))) if normalize else (lambda h: np.asarray(h, dtype=np.float64))
    a = _pad([prep(h) for h in set_a], length)
    b = _pad([prep(h) for h in set_b], length)

    def gram(x, y):
        tv = 0.5 * np.abs(x[:, None, :] - y[None, :, :]).sum(-1)
        return np.exp(-(tv ** 2) / bandwidth ** 2)

    val = gram(a, a).mean() + gram(b, b).mean() - 2.0 * gram(a, b).mean()
    return max(float(val), 0.0)


def mmd_report(generated: list[LabeledGraph], reference: list[LabeledGraph], bandwidth: float = 1.0,
               kinds=STAT_KINDS) -> dict[str, float]:
    return {
        f"{k}_mmd": mmd([statistic(g, k) for g in generated], [statistic(g, k) for g in reference], bandwidth)
        for k in kinds
    }
