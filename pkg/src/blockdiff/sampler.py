"""Block-by-block ancestral generation and generation-path checks."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import torch

from .graph import LabeledGraph
from .kernel import NoiseSchedule, reverse_probs
from .model import Denoiser
from .order import structural_partial_order
from .rng import categorical, stream, word
from .training import GraphView, TrainExample, collate

DEFAULT_MAX_NODES = 64
DEFAULT_MAX_BLOCKS = 32


@dataclass
class FirstBlockPrior:
    """Empirical joint distribution of (size, degree) of the first block."""

    support: list[tuple[int, int]]
    probs: list[float]

    def __post_init__(self):
        if not self.support or len(self.support) != len(self.probs):
            raise ValueError("prior needs a non-empty support with one probability each")
        if abs(sum(self.probs) - 1.0) > 1e-9 or min(self.probs) < 0:
            raise ValueError("prior probabilities must be non-negative and sum to 1")

    @classmethod
    def from_examples(cls, examples: list[TrainExample], use_degree: bool = True) -> "FirstBlockPrior":
        counts = Counter()
        for ex in examples:
            b1 = ex.decomposition.blocks[0]
            counts[(len(b1), int(ex.degrees[b1[0]]) if use_degree else 0)] += 1
        support = sorted(counts)
        total = sum(counts.values())
        return cls(support, [counts[s] / total for s in support])

    def sample(self, u: float) -> tuple[int, int]:
        idx = int(categorical(np.asarray(self.probs), np.asarray(u)))
        return self.support[idx]

    def to_dict(self) -> dict:
        return {"support": [list(s) for s in self.support], "probs": list(self.probs)}

    @classmethod
    def from_dict(cls, d: dict) -> "FirstBlockPrior":
        return cls([tuple(s) for s in d["support"]], list(d["probs"]))


@dataclass
class GenerativeModel:
    diffusion: Denoiser
    size: Denoiser
    schedule: NoiseSchedule
    prior: FirstBlockPrior
    k_hops: int
    degree_conditioning: bool = True


@dataclass
class Limits:
    max_nodes: int = DEFAULT_MAX_NODES
    max_blocks: int = DEFAULT_MAX_BLOCKS


@dataclass
class BlockRecord:
    block: int
    size: int
    degree: int
    states: list = field(default_factory=list)  # (t, node labels, edge labels) before each reverse step


@dataclass
class GenerationTrace:
    records: list[BlockRecord]
    graph: LabeledGraph
    truncated: bool = False

    @property
    def sizes(self) -> list[int]:
        return [r.size for r in self.records]

    def to_dict(self) -> dict:
        return {
            "blocks": [{"block": r.block, "size": r.size, "degree": r.degree} for r in self.records],
            "n": self.graph.n,
            "truncated": self.truncated,
        }


def _reverse_sample(logits: torch.Tensor, xt: np.ndarray, a_t: float, abar_tm1: float, u: np.ndarray) -> np.ndarray:
    x0 = torch.softmax(logits.to(torch.float64), dim=-1)
    shape = xt.shape
    p = reverse_probs(
        x0,
        torch.from_numpy(xt),
        torch.full(shape, a_t, dtype=torch.float64),
        torch.full(shape, abar_tm1, dtype=torch.float64),
    )
    return categorical(p.numpy(), u)


def initial_noise(seed: int, sample_id: int, block: int, n_nodes: int, n_pairs: int, k_v: int, k_e: int):
    """Uniform labels for the new nodes and new pairs of a block, the start of its reverse chain."""
    u = stream(seed, word("init"), sample_id, block).random(n_nodes + n_pairs)
    return (categorical(np.full((n_nodes, k_v), 1.0 / k_v), u[:n_nodes]),
            categorical(np.full((n_pairs, k_e), 1.0 / k_e), u[n_nodes:]))


@torch.no_grad()
def generate(model: GenerativeModel, seed: int, sample_id: int = 0, limits: Limits | None = None,
             keep_states: bool = False) -> GenerationTrace:
    limits = limits or Limits()
    diff, size_net, sched = model.diffusion, model.size, model.schedule
    k_v, k_e = diff.cfg.k_v, diff.cfg.k_e
    nodes = np.zeros(0, dtype=np.int64)
    edges = np.zeros((0, 0), dtype=np.int64)
    phi = np.zeros(0, dtype=np.int64)
    deg = np.zeros(0, dtype=np.int64)
    records: list[BlockRecord] = []
    truncated = False

    size, degree = model.prior.sample(stream(seed, word("prior"), sample_id).random())
    i = 1
    while size > 0:
        if i > limits.max_blocks or len(nodes) + size > limits.max_nodes:
            truncated = True
            break
        n_old, n = len(nodes), len(nodes) + size
        new = np.arange(n) >= n_old
        touches = (new[:, None] | new[None, :]) & ~np.eye(n, dtype=bool)
        iu, ju = np.nonzero(np.triu(touches, 1))

        init_nodes, init_edges = initial_noise(seed, sample_id, i, size, len(iu), k_v, k_e)
        nodes = np.concatenate([nodes, init_nodes])
        grown = np.zeros((n, n), dtype=np.int64)
        grown[:n_old, :n_old] = edges
        grown[iu, ju] = grown[ju, iu] = init_edges
        edges = grown
        phi = np.concatenate([phi, np.full(size, i)])
        deg = np.concatenate([deg, np.full(size, degree if model.degree_conditioning else 0)])
        record = BlockRecord(i, size, degree)

        for t in range(sched.t_max, 0, -1):
            if keep_states:
                record.states.append((t, nodes.copy(), edges.copy()))
            view = GraphView(nodes, edges, phi, deg, new.astype(np.int64), t)
            out = diff(collate([view]))
            u = stream(seed, word("reverse"), sample_id, i, t).random(size + len(iu))
            a_t, ab = sched.a(t), sched.abar(t - 1)
            nodes = nodes.copy()
            nodes[n_old:] = _reverse_sample(out.node_logits[0, n_old:], nodes[n_old:], a_t, ab, u[:size])
            upd = _reverse_sample(out.edge_logits[0, iu, ju], edges[iu, ju], a_t, ab, u[size:])
            edges = edges.copy()
            edges[iu, ju] = edges[ju, iu] = upd
        records.append(record)

        if model.degree_conditioning:
            deg = deg.copy()
            deg[n_old:] = (edges[n_old:] != 0).sum(1)
        clean = GraphView(nodes, edges, phi, deg, np.zeros(n, dtype=np.int64), 0)
        out = size_net(collate([clean]))
        r = min(i, size_net.cfg.max_block_id) - 1
        u = stream(seed, word("next-size"), sample_id, i).random(2)
        size = int(categorical(torch.softmax(out.size_logits[0, r].double(), -1).numpy(), u[0]))
        degree = int(categorical(torch.softmax(out.degree_logits[0, r].double(), -1).numpy(), u[1]))
        i += 1

    g = LabeledGraph(nodes, edges, k_v=k_v, k_e=k_e)
    return GenerationTrace(records, g, truncated)


def generate_many(model: GenerativeModel, count: int, seed: int, limits: Limits | None = None) -> list[GenerationTrace]:
    return [generate(model, seed, s, limits) for s in range(count)]


def path_matches(trace: GenerationTrace, k_hops: int) -> bool:
    if trace.truncated:
        return False
    d = structural_partial_order(trace.graph, k_hops)
    return d.sizes == trace.sizes


def path_consistency_report(traces: list[GenerationTrace], k_hops: int) -> float:
    """Fraction of samples whose recomputed block sizes equal the generated ones."""
    if not traces:
        return 0.0
    return sum(path_matches(tr, k_hops) for tr in traces) / len(traces)
