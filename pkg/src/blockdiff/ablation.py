"""Sweeps over peeling hops and diffusion steps per block."""

from __future__ import annotations

import statistics

import numpy as np

from .config import RunConfig
from .experiment import evaluate, new_run, train
from .graph import LabeledGraph


def ablation_row(cfg: RunConfig, train_graphs: list[LabeledGraph], test_graphs: list[LabeledGraph],
                 samples: int) -> dict:
    run = train(new_run(cfg, train_graphs))
    ev = evaluate(run.model, test_graphs, train_graphs, samples, seed=cfg.seed + 1000)
    last = run.history[-1]
    return {
        "k_hops": cfg.k_hops,
        "steps": cfg.t_max,
        "seed": cfg.seed,
        "mean_blocks": float(np.mean([ex.decomposition.num_blocks for ex in run.examples])),
        "final_diffusion_loss": last.diffusion_loss,
        "final_size_loss": last.size_loss,
        **ev["model"],
        "path_consistency": ev["path_consistency"],
    }


def ablation_table(cfg: RunConfig, train_graphs, test_graphs, k_hops, steps, seeds, samples: int = 40) -> dict:
    """Every (k_hops, steps, seed) run plus the per-setting median over seeds."""
    rows = []
    for kh in k_hops:
        for t in steps:
            for seed in seeds:
                rows.append(ablation_row(cfg.replace(k_hops=kh, t_max=t, seed=seed), train_graphs, test_graphs, samples))
    medians = []
    for kh in k_hops:
        for t in steps:
            group = [r for r in rows if r["k_hops"] == kh and r["steps"] == t]
            med = {"k_hops": kh, "steps": t}
            for key in ("mean_blocks", "final_diffusion_loss", "degree_mmd", "clustering_mmd", "orbit_mmd",
                        "path_consistency"):
                med[key] = statistics.median(r[key] for r in group)
            medians.append(med)
    return {"runs": rows, "median": medians}
