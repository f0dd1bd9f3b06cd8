"""Small fixtures shared by several test modules."""

import numpy as np
import torch

from blockdiff.graph import LabeledGraph
from blockdiff.model import Denoiser, DenoiserConfig, DenoiserInputs
from blockdiff.order import BlockDecomposition, block_degrees
from blockdiff.training import GraphView, TrainExample, collate


def tiny_config(**kw) -> DenoiserConfig:
    base = dict(layers=1, node_dim=8, edge_dim=4, heads=2, max_block_id=6, max_degree=6, t_max=5,
                max_block_size=6, k_v=2, k_e=3)
    base.update(kw)
    return DenoiserConfig(**base)


def small_config(**kw) -> DenoiserConfig:
    base = dict(layers=2, node_dim=16, edge_dim=8, heads=2, max_block_id=12, max_degree=12, t_max=5,
                max_block_size=12)
    base.update(kw)
    return DenoiserConfig(**base)


def random_inputs(n: int, blocks: int, k_v: int, k_e: int, seed: int, virtual_top: bool = False) -> DenoiserInputs:
    rng = np.random.default_rng(seed)
    ids = rng.integers(1, blocks + 1, size=n)
    upper = np.triu(rng.integers(0, k_e, size=(n, n)), 1)
    view = GraphView(
        node_labels=rng.integers(0, k_v, size=n),
        edge_labels=upper + upper.T,
        block_ids=ids,
        degrees=rng.integers(0, 4, size=n),
        virtual=(ids == ids.max()).astype(np.int64) if virtual_top else np.zeros(n, dtype=np.int64),
        t=int(rng.integers(1, 5)),
    )
    return collate([view])


def example_with_blocks(g: LabeledGraph, phi, index: int = 0) -> TrainExample:
    """Training example with a hand-chosen block assignment."""
    phi = np.asarray(phi, dtype=np.int64)
    blocks = [sorted(np.flatnonzero(phi == r).tolist()) for r in range(1, phi.max() + 1)]
    d = BlockDecomposition(phi, blocks, k_hops=-1)
    return TrainExample(g, d, block_degrees(g, d), index)


def model(cfg: DenoiserConfig, seed: int = 0, dtype=torch.float64) -> Denoiser:
    return Denoiser(cfg, seed=seed).to(dtype)


# acceptance verdicts, printed once at the end of the session
VERDICTS: dict[int, str] = {}


def verdict(number: int, title: str, ok: bool, detail: str) -> bool:
    VERDICTS[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    return ok
