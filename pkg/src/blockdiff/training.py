"""Block-conditional diffusion training and next-block size/degree training.

Two views produce the same objective:

* sequential: one network call per (graph, block) on the prefix graph
  ``G[B_1..B_i]`` with the new block noised;
* parallel: one call per graph on a 2N layout where every node has a noisy
  virtual twin (see :mod:`blockdiff.causal`), giving every block's loss at once.

Noise is drawn from counter-based streams keyed on (seed, graph, epoch) and
indexed by original node ids, so both views see exactly the same corruption.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .causal import visibility_mask
from .graph import LabeledGraph
from .kernel import NoiseSchedule, hybrid_terms, sample_forward
from .model import Denoiser, DenoiserInputs
from .order import BlockDecomposition, block_degree_is_uniform, block_degrees, structural_partial_order
from .rng import stream, uniforms, word

log = logging.getLogger(__name__)

CE_WEIGHT = 0.1
MODES = ("parallel", "sequential")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainExample:
    graph: LabeledGraph
    decomposition: BlockDecomposition
    degrees: np.ndarray  # degree of each node inside the prefix that introduced it
    index: int  # stable graph id used to key noise streams

    @classmethod
    def build(cls, g: LabeledGraph, k_hops: int, index: int) -> "TrainExample":
        d = structural_partial_order(g, k_hops)
        return cls(g, d, block_degrees(g, d), index)

    @property
    def n(self) -> int:
        return self.graph.n

    def degree_uniform(self) -> bool:
        return block_degree_is_uniform(self.graph, self.decomposition)


def build_examples(graphs, k_hops: int) -> list[TrainExample]:
    return [TrainExample.build(g, k_hops, i) for i, g in enumerate(graphs)]


@dataclass
class GraphView:
    """One unpadded network input plus the elements it supervises."""

    node_labels: np.ndarray
    edge_labels: np.ndarray
    block_ids: np.ndarray
    degrees: np.ndarray
    virtual: np.ndarray
    t: int
    graph: int = 0  # which example of the batch the supervised terms belong to
    sup_nodes: list = field(default_factory=list)  # (position, x0, xt)
    sup_edges: list = field(default_factory=list)  # (pos_i, pos_j, x0, xt)

    @property
    def n(self) -> int:
        return len(self.node_labels)


def collate(views: list[GraphView], device=None) -> DenoiserInputs:
    """Pad views to a common size. Padded nodes read only themselves."""
    B = len(views)
    n = max(v.n for v in views)
    node_labels = np.zeros((B, n), dtype=np.int64)
    edge_labels = np.zeros((B, n, n), dtype=np.int64)
    block_ids = np.zeros((B, n), dtype=np.int64)
    degrees = np.zeros((B, n), dtype=np.int64)
    virtual = np.zeros((B, n), dtype=np.int64)
    mask = np.zeros((B, n, n), dtype=bool)
    valid = np.zeros((B, n), dtype=bool)
    for b, v in enumerate(views):
        m = v.n
        node_labels[b, :m] = v.node_labels
        edge_labels[b, :m, :m] = v.edge_labels
        block_ids[b, :m] = v.block_ids
        degrees[b, :m] = v.degrees
        virtual[b, :m] = v.virtual
        mask[b, :m, :m] = visibility_mask(v.block_ids, v.virtual)
        valid[b, :m] = True
        mask[b, np.arange(m, n), np.arange(m, n)] = True
    t = np.array([v.t for v in views], dtype=np.int64)
    as_t = lambda a: torch.from_numpy(a).to(device)  # noqa: E731
    return DenoiserInputs(
        as_t(node_labels), as_t(edge_labels), as_t(t), as_t(block_ids),
        as_t(degrees), as_t(virtual), as_t(mask), as_t(valid),
    )


@dataclass
class NoiseDraw:
    t: int
    nodes: np.ndarray  # noisy node labels, one per original node
    edges: np.ndarray  # noisy symmetric edge labels over original pairs


def sample_t(seed: int, graph: int, epoch: int, t_max: int) -> int:
    return int(stream(seed, word("t"), graph, epoch).integers(1, t_max + 1))


def draw_noise(ex: TrainExample, schedule: NoiseSchedule, seed: int, epoch: int, t: int | None = None) -> NoiseDraw:
    """Corrupt every node and pair of ``ex`` to step ``t`` (drawn if not given)."""
    g = ex.graph
    if t is None:
        t = sample_t(seed, ex.index, epoch, schedule.t_max)
    abar = schedule.abar(t)
    u_nodes = uniforms(seed, word("node-noise"), ex.index, epoch, size=g.n)
    u_edges = np.triu(uniforms(seed, word("edge-noise"), ex.index, epoch, size=(g.n, g.n)), 1)
    u_edges = u_edges + u_edges.T
    nodes = sample_forward(np.asarray(g.node_labels), abar, g.k_v, u_nodes)
    edges = sample_forward(np.asarray(g.edge_labels), abar, g.k_e, u_edges)
    edges = np.triu(edges, 1)
    return NoiseDraw(t, nodes, edges + edges.T)


def _features(ex: TrainExample, use_degree: bool) -> np.ndarray:
    return ex.degrees if use_degree else np.zeros(ex.n, dtype=np.int64)


def parallel_view(ex: TrainExample, noise: NoiseDraw, use_degree: bool = True, graph: int = 0) -> GraphView:
    """All blocks at once: real nodes 0..N-1 stay clean, twin N+u carries node u's noise."""
    g, phi, N = ex.graph, ex.decomposition.phi, ex.n
    x0_e = np.asarray(g.edge_labels)
    deg = _features(ex, use_degree)
    edges = np.zeros((2 * N, 2 * N), dtype=np.int64)
    edges[:N, :N] = x0_e
    sup_nodes = [(N + u, int(g.node_labels[u]), int(noise.nodes[u])) for u in range(N)]
    sup_edges = []
    for u in range(N):
        for w in range(u + 1, N):
            xt = int(noise.edges[u, w])
            if phi[u] == phi[w]:
                a, b = N + u, N + w
            elif phi[u] > phi[w]:
                a, b = N + u, w
            else:
                a, b = N + w, u
            edges[a, b] = edges[b, a] = xt
            sup_edges.append((a, b, int(x0_e[u, w]), xt))
    return GraphView(
        node_labels=np.concatenate([g.node_labels, noise.nodes]),
        edge_labels=edges,
        block_ids=np.concatenate([phi, phi]),
        degrees=np.concatenate([deg, deg]),
        virtual=np.concatenate([np.zeros(N, dtype=np.int64), np.ones(N, dtype=np.int64)]),
        t=noise.t,
        graph=graph,
        sup_nodes=sup_nodes,
        sup_edges=sup_edges,
    )


def sequential_view(ex: TrainExample, noise: NoiseDraw, block: int, use_degree: bool = True, graph: int = 0) -> GraphView:
    """Prefix graph ``G[B_1..B_block]`` with only the newest block noised."""
    g, phi = ex.graph, ex.decomposition.phi
    if not 1 <= block <= ex.decomposition.num_blocks:
        raise TrainingError(f"block {block} outside [1, {ex.decomposition.num_blocks}]")
    nodes = np.flatnonzero(phi <= block)
    new = phi[nodes] == block
    if not new.any():
        raise TrainingError(f"block {block} of graph {ex.index} is empty")
    x0_n = np.asarray(g.node_labels)[nodes]
    x0_e = np.asarray(g.edge_labels)[np.ix_(nodes, nodes)]
    xt_e = noise.edges[np.ix_(nodes, nodes)]
    touches_new = new[:, None] | new[None, :]
    node_labels = np.where(new, noise.nodes[nodes], x0_n)
    edge_labels = np.where(touches_new, xt_e, x0_e)
    m = len(nodes)
    sup_nodes = [(a, int(x0_n[a]), int(node_labels[a])) for a in range(m) if new[a]]
    sup_edges = [
        (a, b, int(x0_e[a, b]), int(edge_labels[a, b]))
        for a in range(m) for b in range(a + 1, m) if touches_new[a, b]
    ]
    return GraphView(
        node_labels=node_labels,
        edge_labels=edge_labels,
        block_ids=phi[nodes],
        degrees=_features(ex, use_degree)[nodes],
        virtual=new.astype(np.int64),
        t=noise.t,
        graph=graph,
        sup_nodes=sup_nodes,
        sup_edges=sup_edges,
    )


@dataclass
class LossBreakdown:
    total: torch.Tensor  # sum of per-element terms over the batch
    count: int  # number of supervised elements
    per_graph: torch.Tensor  # per-example sums

    @property
    def mean(self) -> torch.Tensor:
        return self.total / max(self.count, 1)


def diffusion_loss(model: Denoiser, views: list[GraphView], schedule: NoiseSchedule, num_graphs: int,
                   ce_weight: float = CE_WEIGHT) -> LossBreakdown:
    """Hybrid KL + ``ce_weight`` * CE summed over the supervised elements of ``views``."""
    inp = collate(views)
    out = model(inp)
    dtype = out.edge_logits.dtype
    a_tab, ab_tab = schedule.tables(dtype)
    per_graph = torch.zeros(num_graphs, dtype=dtype)
    count = 0
    for kind in ("nodes", "edges"):
        rows, pos_i, pos_j, x0, xt = [], [], [], [], []
        for b, v in enumerate(views):
            for s in getattr(v, "sup_" + kind):
                rows.append(b)
                pos_i.append(s[0])
                if kind == "edges":
                    pos_j.append(s[1])
                x0.append(s[-2])
                xt.append(s[-1])
        if not rows:
            continue
        rows_t = torch.tensor(rows)
        if kind == "nodes":
            logits = out.node_logits[rows_t, torch.tensor(pos_i)]
        else:
            logits = out.edge_logits[rows_t, torch.tensor(pos_i), torch.tensor(pos_j)]
        t = inp.t[rows_t]
        kl, ce = hybrid_terms(logits, torch.tensor(x0), torch.tensor(xt), a_tab[t], ab_tab[t - 1])
        graph_of = torch.tensor([views[b].graph for b in rows])
        per_graph = per_graph.index_add(0, graph_of, kl + ce_weight * ce)
        count += len(rows)
    return LossBreakdown(per_graph.sum(), count, per_graph)


def block_diffusion_loss(model: Denoiser, ex: TrainExample, noise: NoiseDraw, block: int, schedule: NoiseSchedule,
                         use_degree: bool = True, ce_weight: float = CE_WEIGHT) -> LossBreakdown:
    """Loss of a single block on its own prefix graph."""
    return diffusion_loss(model, [sequential_view(ex, noise, block, use_degree)], schedule, 1, ce_weight)


def batch_views(examples: list[TrainExample], noises: list[NoiseDraw], mode: str, use_degree: bool) -> list[GraphView]:
    if mode == "parallel":
        return [parallel_view(ex, nz, use_degree, graph=k) for k, (ex, nz) in enumerate(zip(examples, noises))]
    if mode == "sequential":
        return [
            sequential_view(ex, nz, i, use_degree, graph=k)
            for k, (ex, nz) in enumerate(zip(examples, noises))
            for i in range(1, ex.decomposition.num_blocks + 1)
        ]
    raise TrainingError(f"mode must be one of {MODES}")


# next-block size / degree -------------------------------------------------------------------------------


def size_targets(ex: TrainExample, max_block_size: int) -> list[tuple[int, int, int | None]]:
    """(prefix r, size of block r+1 or 0 to stop, its degree or None at stop)."""
    d = ex.decomposition
    if d.num_blocks == 0:
        raise TrainingError(f"graph {ex.index} has no blocks")
    out = []
    for r in range(1, d.num_blocks + 1):
        if r < d.num_blocks:
            nxt = d.blocks[r]
            if len(nxt) > max_block_size:
                raise TrainingError(f"graph {ex.index}: block {r + 1} has {len(nxt)} nodes > max_block_size {max_block_size}")
            out.append((r, len(nxt), int(ex.degrees[nxt[0]])))
        else:
            out.append((r, 0, None))
    return out


def clean_view(ex: TrainExample, use_degree: bool = True) -> GraphView:
    g = ex.graph
    return GraphView(
        node_labels=np.asarray(g.node_labels),
        edge_labels=np.asarray(g.edge_labels),
        block_ids=ex.decomposition.phi,
        degrees=_features(ex, use_degree),
        virtual=np.zeros(ex.n, dtype=np.int64),
        t=0,
    )


def blocksize_loss(model: Denoiser, examples: list[TrainExample], use_degree: bool = True) -> LossBreakdown:
    """Cross-entropy of next-block size (and degree) from every prefix, summed."""
    cfg = model.cfg
    out = model(collate([clean_view(ex, use_degree) for ex in examples]))
    dtype = out.size_logits.dtype
    per_graph = torch.zeros(len(examples), dtype=dtype)
    count = 0
    for k, ex in enumerate(examples):
        targets = size_targets(ex, cfg.max_block_size)
        r = torch.tensor([min(r, cfg.max_block_id) - 1 for r, _, _ in targets])
        sizes = torch.tensor([s for _, s, _ in targets])
        loss = torch.nn.functional.cross_entropy(out.size_logits[k, r], sizes, reduction="sum")
        count += len(targets)
        if use_degree:
            with_deg = [(rr, dd) for (_, _, dd), rr in zip(targets, r.tolist()) if dd is not None]
            if with_deg:
                rd = torch.tensor([a for a, _ in with_deg])
                dg = torch.tensor([min(b, cfg.max_degree) for _, b in with_deg])
                loss = loss + torch.nn.functional.cross_entropy(out.degree_logits[k, rd], dg, reduction="sum")
                count += len(with_deg)
        per_graph = per_graph.index_put((torch.tensor(k),), loss.reshape(()), accumulate=True)
    return LossBreakdown(per_graph.sum(), count, per_graph)


# optimisation -------------------------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 400
    batch_size: int = 16
    lr: float = 3e-4
    lr_min: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    mode: str = "parallel"
    ce_weight: float = CE_WEIGHT
    degree_conditioning: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr < 0 or self.lr_min < 0:
            raise ValueError("learning rates must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def cosine_lr(step: int, total: int, lr: float, lr_min: float) -> float:
    if total <= 1:
        return lr
    frac = min(step / (total - 1), 1.0)
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + math.cos(math.pi * frac))


class OptimizerState:
    """Adam over both networks plus the position in the cosine schedule."""

    def __init__(self, models: dict[str, torch.nn.Module], cfg: TrainConfig, total_steps: int):
        self.cfg = cfg
        self.models = models
        self.total_steps = total_steps
        self.step = 0
        self.adam = {
            name: torch.optim.Adam(m.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
            for name, m in models.items()
        }

    def current_lr(self) -> float:
        return cosine_lr(self.step, self.total_steps, self.cfg.lr, self.cfg.lr_min)

    def zero_grad(self):
        for opt in self.adam.values():
            opt.zero_grad(set_to_none=True)

    def apply(self):
        lr = self.current_lr()
        for opt in self.adam.values():
            for group in opt.param_groups:
                group["lr"] = lr
            opt.step()
        self.step += 1

    def moments(self) -> dict[str, torch.Tensor]:
        """Adam state as float64 tensors keyed ``<net>.<param>.<exp_avg|exp_avg_sq|step>``."""
        out = {}
        for name, m in self.models.items():
            state = self.adam[name].state
            for pn, p in m.named_parameters():
                for key, val in state.get(p, {}).items():
                    out[f"{name}.{pn}.{key}"] = torch.as_tensor(val).to(torch.float64).reshape(p.shape if key != "step" else ())
        return out

    def load_moments(self, flat: dict[str, torch.Tensor]):
        for name, m in self.models.items():
            opt = self.adam[name]
            for pn, p in m.named_parameters():
                prefix = f"{name}.{pn}."
                st = {}
                for key in ("step", "exp_avg", "exp_avg_sq"):
                    if prefix + key in flat:
                        val = flat[prefix + key]
                        st[key] = val.to(torch.float32).reshape(()) if key == "step" else val.to(p.dtype).reshape(p.shape).clone()
                if st:
                    opt.state[p] = st


@dataclass
class EpochMetrics:
    epoch: int
    diffusion_loss: float
    size_loss: float
    lr: float


def train_step(diff_model: Denoiser, size_model: Denoiser, batch: list[TrainExample], schedule: NoiseSchedule,
               opt: OptimizerState, seed: int, epoch: int) -> tuple[float, float]:
    cfg = opt.cfg
    noises = [draw_noise(ex, schedule, seed, epoch) for ex in batch]
    views = batch_views(batch, noises, cfg.mode, cfg.degree_conditioning)
    opt.zero_grad()
    dl = diffusion_loss(diff_model, views, schedule, len(batch), cfg.ce_weight)
    sl = blocksize_loss(size_model, batch, cfg.degree_conditioning)
    loss = dl.mean + sl.mean
    if not torch.isfinite(loss):
        raise TrainingError(f"non-finite loss at epoch {epoch}")
    loss.backward()
    opt.apply()
    return float(dl.mean.detach()), float(sl.mean.detach())


def train_epoch(diff_model: Denoiser, size_model: Denoiser, examples: list[TrainExample], schedule: NoiseSchedule,
                opt: OptimizerState, seed: int, epoch: int) -> EpochMetrics:
    """One pass over ``examples`` in a seed/epoch-determined order."""
    cfg = opt.cfg
    order = stream(seed, word("shuffle"), epoch).permutation(len(examples))
    lr = opt.current_lr()
    d_sum = s_sum = 0.0
    batches = 0
    for start in range(0, len(examples), cfg.batch_size):
        batch = [examples[i] for i in order[start:start + cfg.batch_size]]
        d, s = train_step(diff_model, size_model, batch, schedule, opt, seed, epoch)
        d_sum += d
        s_sum += s
        batches += 1
    return EpochMetrics(epoch, d_sum / batches, s_sum / batches, lr)


def check_degree_conditioning(examples: list[TrainExample], requested: bool) -> bool:
    """Degree conditioning needs every block to share one degree; turn it off otherwise."""
    if not requested:
        return False
    bad = [ex.index for ex in examples if not ex.degree_uniform()]
    if bad:
        log.warning("%d graphs have blocks with mixed degrees (e.g. graph %d); degree conditioning disabled",
                    len(bad), bad[0])
        return False
    return True
