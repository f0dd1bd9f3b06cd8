"""Command-line interface.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from . import datasets
from .checkpoint import CheckpointError, load_checkpoint
from .config import ConfigError, RunConfig
from .graph import GraphError
from .io import read_graphs, write_graphs
from .metrics import mmd_report
from .order import structural_partial_order
from .sampler import Limits, generate_many, path_consistency_report
from .symmetry import symmetry_witness

log = logging.getLogger("blockdiff")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(obj, out: str | None):
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_gen_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    params = None
    if args.params:
        cls = {"community": datasets.CommunityParams, "caveman": datasets.CavemanParams, "grid": datasets.GridParams}[args.kind]
        try:
            params = cls(**json.loads(args.params))
        except (TypeError, json.JSONDecodeError) as exc:
            raise datasets.DatasetError(f"bad --params: {exc}") from exc
    graphs = datasets.generate_dataset(args.kind, args.count, rng, params)
    if args.split:
        train, val, test = datasets.split(graphs, rng)
        stem = Path(args.out)
        for name, part in (("train", train), ("val", val), ("test", test)):
            write_graphs(stem.with_name(f"{stem.stem}.{name}{stem.suffix}"), part)
        print(f"wrote {len(train)}/{len(val)}/{len(test)} train/val/test graphs next to {args.out}")
    else:
        write_graphs(args.out, graphs)
        print(f"wrote {len(graphs)} {args.kind} graphs to {args.out}")
    return 0


def cmd_decompose(args) -> int:
    graphs = read_graphs(args.inp)
    out = []
    for i, g in enumerate(graphs):
        d = structural_partial_order(g, args.k_hops, static=args.static)
        out.append({"graph": i, "n": g.n, "block_sizes": d.sizes, "blocks": d.blocks})
    _emit(out, args.out)
    return 0


def cmd_train(args) -> int:
    from .experiment import from_checkpoint, new_run, train

    cfg = RunConfig.from_json(args.config)
    overrides = {}
    if args.epochs is not None:
        overrides["train.epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.dataset is not None:
        overrides["dataset"] = args.dataset
    if overrides:
        cfg = cfg.replace(**overrides)
    if not cfg.dataset:
        raise ConfigError("no dataset: set 'dataset' in the config or pass --dataset")
    graphs = read_graphs(cfg.dataset)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    run = from_checkpoint(load_checkpoint(args.resume), graphs) if args.resume else new_run(cfg, graphs)
    with open(out / "metrics.jsonl", "a") as fh:
        def progress(m):
            fh.write(json.dumps(m.__dict__) + "\n")
            fh.flush()
            if m.epoch % max(1, args.log_every) == 0:
                log.info("epoch %d  diffusion %.4f  size %.4f  lr %.2e", m.epoch, m.diffusion_loss, m.size_loss, m.lr)

        # an explicit --epochs extends a resumed run past its saved target
        train(run, epochs=args.epochs, checkpoint_dir=out, progress=progress)
    print(f"trained {run.epoch} epochs; checkpoint at {out / 'checkpoint.ckpt'}")
    return 0


def cmd_sample(args) -> int:
    from .experiment import from_checkpoint

    torch.set_num_threads(1)
    run = from_checkpoint(load_checkpoint(args.checkpoint))
    traces = generate_many(run.model, args.count, args.seed, Limits(args.max_nodes, args.max_blocks))
    write_graphs(args.out, [t.graph for t in traces])
    if args.trace:
        _emit([t.to_dict() for t in traces], args.trace)
    frac = path_consistency_report(traces, run.model.k_hops)
    print(f"wrote {len(traces)} graphs to {args.out}; path consistency {frac:.3f}")
    return 0


def cmd_eval(args) -> int:
    from .metrics import STAT_KINDS, statistic

    gen, ref = read_graphs(args.generated), read_graphs(args.reference)
    if not gen or not ref:
        raise GraphError("both graph files must contain at least one graph")
    report = mmd_report(gen, ref, args.bandwidth)
    if args.histograms:
        report["histograms"] = {
            k: {"generated": [statistic(g, k).tolist() for g in gen], "reference": [statistic(g, k).tolist() for g in ref]}
            for k in STAT_KINDS
        }
    _emit(report, args.out)
    return 0


def cmd_demo_symmetry(args) -> int:
    w = symmetry_witness(seed=args.seed, backbone=args.backbone)
    print("prefix: 4-cycle on nodes 1-4; new block: nodes 5, 6 (no noise, uniform labels)")
    for (j, i), logit in zip(w.candidates, w.logits):
        print(f"  edge ({j},{i}): logits {np.array2string(logit, precision=12)}")
    print(f"max spread across the 8 candidate edges: {w.spread:.3e}")
    print(f"target block needs edges {w.target_present} present and the other {8 - len(w.target_present)} absent")
    print("identical predictions cannot realise two different outcomes: target unreachable"
          if w.collision else "candidate logits differ: no collision observed")
    return 0 if w.collision else 2


def cmd_ablate(args) -> int:
    from .ablation import ablation_table

    cfg = RunConfig.from_json(args.config)
    if args.epochs is not None:
        cfg = cfg.replace(**{"train.epochs": args.epochs})
    train_graphs, test_graphs = read_graphs(args.train), read_graphs(args.test)
    rows = ablation_table(
        cfg, train_graphs, test_graphs,
        k_hops=[int(x) for x in args.k_hops.split(",")],
        steps=[int(x) for x in args.steps.split(",")],
        seeds=[int(x) for x in args.seeds.split(",")],
        samples=args.samples,
    )
    _emit(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blockdiff", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("gen-data", help="synthesize a graph dataset")
    s.add_argument("--kind", choices=datasets.KINDS, required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--params", help="JSON object of generator parameters")
    s.add_argument("--split", action="store_true", help="also write 80/20 train/test files (20%% of train as val)")
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("decompose", help="print block decompositions")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--k-hops", type=int, default=3)
    s.add_argument("--static", action="store_true", help="rank by weights on the original graph only")
    s.add_argument("--out")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("train", help="train denoiser and block-size networks")
    s.add_argument("--config", required=True)
    s.add_argument("--dataset")
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--resume", help="checkpoint to continue from")
    s.add_argument("--log-every", type=int, default=10)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="generate graphs from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--count", type=int, default=40)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--trace", help="write per-sample block traces as JSON")
    s.add_argument("--max-nodes", type=int, default=64)
    s.add_argument("--max-blocks", type=int, default=32)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("eval", help="MMD between two graph files")
    s.add_argument("--generated", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--bandwidth", type=float, default=1.0)
    s.add_argument("--histograms", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("demo-symmetry", help="show equal logits on structurally equivalent candidate edges")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--backbone", choices=("hybrid", "ppgn", "transformer"), default="hybrid")
    s.set_defaults(func=cmd_demo_symmetry)

    s = sub.add_parser("ablate", help="sweep k_hops x steps per block")
    s.add_argument("--config", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--k-hops", default="0,1,3")
    s.add_argument("--steps", default="20")
    s.add_argument("--seeds", default="0")
    s.add_argument("--samples", type=int, default=40)
    s.add_argument("--epochs", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"blockdiff: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not args.command:
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GraphError, CheckpointError, datasets.DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"blockdiff: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"blockdiff: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
