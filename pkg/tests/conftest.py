import numpy as np
import pytest
import torch

from blockdiff.config import RunConfig
from blockdiff.experiment import new_run, train
from blockdiff.graph import LabeledGraph
from blockdiff.training import diffusion_loss, draw_noise, parallel_view

torch.set_num_threads(1)


def star(leaves: int) -> LabeledGraph:
    return LabeledGraph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


MEMORIZE = {
    "t_max": 20,
    "seed": 0,
    "model": {"layers": 2, "node_dim": 32, "edge_dim": 16, "heads": 2, "max_block_id": 4, "max_degree": 6,
              "max_block_size": 8, "k_v": 1, "k_e": 2},
    "train": {"epochs": 500, "batch_size": 1, "lr": 3e-3, "lr_min": 1e-4},
}


@torch.no_grad()
def expected_loss(run, draws: int = 3) -> float:
    """Diffusion loss averaged over every t and a few fixed noise draws."""
    ex, sched = run.examples[0], run.model.schedule
    vals = [
        float(diffusion_loss(run.model.diffusion, [parallel_view(ex, draw_noise(ex, sched, 99, e, t=t))], sched, 1).mean)
        for t in range(1, sched.t_max + 1) for e in range(draws)
    ]
    return float(np.mean(vals))


@pytest.fixture(scope="session")
def memorized_star():
    """A small run trained to memorise the 5-leaf star, with its loss every 50 epochs."""
    cfg = RunConfig.from_dict(MEMORIZE)
    run = new_run(cfg, [star(5)])
    curve = [expected_loss(run)]
    for stop in range(50, cfg.train.epochs + 1, 50):
        train(run, epochs=stop)
        curve.append(expected_loss(run))
    run.curve = curve
    return run


def pytest_terminal_summary(terminalreporter):
    from helpers import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
