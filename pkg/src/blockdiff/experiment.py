"""Training runs, checkpoint (de)serialisation of whole runs, and evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import Checkpoint, CheckpointError, load_module, module_tensors, save_checkpoint
from .config import RunConfig, validate_against
from .datasets import erdos_renyi_baseline
from .graph import LabeledGraph
from .kernel import NoiseSchedule, make_schedule
from .metrics import mmd_report
from .model import Denoiser
from .sampler import FirstBlockPrior, GenerativeModel, Limits, generate_many, path_consistency_report
from .training import (
    EpochMetrics,
    OptimizerState,
    TrainExample,
    TrainingError,
    build_examples,
    check_degree_conditioning,
    train_epoch,
)

log = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class Run:
    cfg: RunConfig
    model: GenerativeModel
    opt: OptimizerState
    examples: list[TrainExample]
    epoch: int = 0  # next epoch to run
    history: list[EpochMetrics] = field(default_factory=list)


def _networks(cfg: RunConfig) -> tuple[Denoiser, Denoiser]:
    dtype = DTYPES[cfg.precision]
    diff = Denoiser(cfg.model, seed=cfg.seed).to(dtype)
    size = diff if cfg.share_trunk else Denoiser(cfg.model, seed=cfg.seed + 1).to(dtype)
    return diff, size


def _optimizer(cfg: RunConfig, diff: Denoiser, size: Denoiser, num_graphs: int, degree: bool) -> OptimizerState:
    models = {"diffusion": diff} if size is diff else {"diffusion": diff, "size": size}
    steps_per_epoch = -(-num_graphs // cfg.train.batch_size)
    train_cfg = cfg.train if degree == cfg.train.degree_conditioning else type(cfg.train)(
        **{**cfg.train.to_dict(), "degree_conditioning": degree}
    )
    return OptimizerState(models, train_cfg, cfg.train.epochs * steps_per_epoch)


def new_run(cfg: RunConfig, graphs: list[LabeledGraph]) -> Run:
    examples = build_examples(graphs, cfg.k_hops)
    validate_against(cfg, examples)
    degree = check_degree_conditioning(examples, cfg.train.degree_conditioning)
    diff, size = _networks(cfg)
    schedule = make_schedule(cfg.schedule, cfg.t_max)
    prior = FirstBlockPrior.from_examples(examples, degree)
    model = GenerativeModel(diff, size, schedule, prior, cfg.k_hops, degree)
    return Run(cfg, model, _optimizer(cfg, diff, size, len(examples), degree), examples)


def to_checkpoint(run: Run) -> Checkpoint:
    m = run.model
    header = {
        "config": run.cfg.to_dict(),
        "schedule": m.schedule.to_dict(),
        "seed": run.cfg.seed,
        "epoch": run.epoch,
        "optimizer_step": run.opt.step,
        "total_steps": run.opt.total_steps,
        "prior": m.prior.to_dict(),
        "degree_conditioning": m.degree_conditioning,
        "num_graphs": len(run.examples),
    }
    tensors = module_tensors("diffusion", m.diffusion)
    if m.size is not m.diffusion:
        tensors.update(module_tensors("size", m.size))
    tensors.update({f"adam.{k}": v.numpy() for k, v in run.opt.moments().items()})
    return Checkpoint(header, tensors)


def from_checkpoint(ckpt: Checkpoint, graphs: list[LabeledGraph] | None = None) -> Run:
    """Rebuild a run. ``graphs`` (the training set) is only needed to keep training."""
    h = ckpt.header
    try:
        cfg = RunConfig.from_dict(h["config"])
        schedule = NoiseSchedule.from_dict(h["schedule"])
        prior = FirstBlockPrior.from_dict(h["prior"])
        degree = bool(h["degree_conditioning"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint header incomplete: {exc}") from exc
    diff, size = _networks(cfg)
    load_module("diffusion", diff, ckpt.tensors)
    if size is not diff:
        load_module("size", size, ckpt.tensors)
    examples = build_examples(graphs, cfg.k_hops) if graphs is not None else []
    opt = _optimizer(cfg, diff, size, h.get("num_graphs", len(examples)), degree)
    opt.total_steps = int(h["total_steps"])
    opt.step = int(h["optimizer_step"])
    opt.load_moments({k[len("adam."):]: torch.from_numpy(v) for k, v in ckpt.tensors.items() if k.startswith("adam.")})
    model = GenerativeModel(diff, size, schedule, prior, cfg.k_hops, degree)
    return Run(cfg, model, opt, examples, epoch=int(h["epoch"]))


def train(run: Run, epochs: int | None = None, checkpoint_dir: str | Path | None = None, progress=None) -> Run:
    """Continue ``run`` up to ``epochs`` (default: the configured count)."""
    if not run.examples:
        raise TrainingError("run has no training graphs")
    stop = run.cfg.train.epochs if epochs is None else epochs
    last_good = None
    torch.set_num_threads(1)
    while run.epoch < stop:
        try:
            metrics = train_epoch(run.model.diffusion, run.model.size, run.examples, run.model.schedule,
                                  run.opt, run.cfg.seed, run.epoch)
        except TrainingError as exc:
            raise TrainingError(f"{exc}; last good checkpoint: {last_good}") from exc
        run.history.append(metrics)
        run.epoch += 1
        if progress:
            progress(metrics)
        if checkpoint_dir is not None and (run.epoch % run.cfg.checkpoint_every == 0 or run.epoch == stop):
            last_good = Path(checkpoint_dir) / "checkpoint.ckpt"
            save_checkpoint(last_good, to_checkpoint(run))
    return run


def evaluate(model: GenerativeModel, reference: list[LabeledGraph], train_graphs: list[LabeledGraph], count: int,
             seed: int, bandwidth: float = 1.0, limits: Limits | None = None) -> dict:
    """MMDs of generated graphs and of a density-matched G(n, p) baseline against ``reference``."""
    traces = generate_many(model, count, seed, limits)
    generated = [t.graph for t in traces]
    baseline = erdos_renyi_baseline(train_graphs, count, np.random.default_rng(seed))
    return {
        "model": mmd_report(generated, reference, bandwidth),
        "baseline": mmd_report(baseline, reference, bandwidth),
        "path_consistency": path_consistency_report(traces, model.k_hops),
        "mean_nodes": float(np.mean([g.n for g in generated])),
        "truncated": sum(t.truncated for t in traces),
    }
