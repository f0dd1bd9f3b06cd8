"""Run configuration: JSON in, validated dataclasses out."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .kernel import make_schedule
from .model import DenoiserConfig
from .training import TrainConfig, TrainExample


class ConfigError(ValueError):
    pass


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    dataset: str | None = None  # graph JSONL used by the train command
    k_hops: int = 3
    t_max: int = 20
    schedule: str = "cosine"
    model: DenoiserConfig = field(default_factory=DenoiserConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    share_trunk: bool = False  # one network for denoising and next-block size
    precision: str = "float32"
    seed: int = 0
    checkpoint_every: int = 50
    out: str = "run"

    def __post_init__(self):
        if self.k_hops < 0:
            raise ConfigError("k_hops must be >= 0")
        if self.precision not in ("float32", "float64"):
            raise ConfigError("precision must be float32 or float64")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        try:
            make_schedule(self.schedule, self.t_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.model.t_max != self.t_max:
            self.model = DenoiserConfig(**{**asdict(self.model), "t_max": self.t_max})

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        model = _build(DenoiserConfig, data.pop("model", {}), "model")
        train = _build(TrainConfig, data.pop("train", {}), "train")
        cfg = _build(cls, data, "config")
        cfg.model, cfg.train = model, train
        cfg.__post_init__()
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        for key, val in changes.items():
            section, _, name = key.rpartition(".")
            (d[section] if section else d)[name] = val
        return RunConfig.from_dict(d)


def validate_against(cfg: RunConfig, examples: list[TrainExample]) -> None:
    """Reject configurations that cannot represent the training set."""
    if not examples:
        raise ConfigError("training set is empty")
    m = cfg.model
    for ex in examples:
        g = ex.graph
        if g.k_v > m.k_v or g.k_e > m.k_e:
            raise ConfigError(f"graph {ex.index} uses vocabularies ({g.k_v}, {g.k_e}) > model ({m.k_v}, {m.k_e})")
        sizes = ex.decomposition.sizes
        if max(sizes) > m.max_block_size:
            raise ConfigError(f"graph {ex.index} has a block of {max(sizes)} nodes > max_block_size {m.max_block_size}")
        if len(sizes) > m.max_block_id:
            raise ConfigError(f"graph {ex.index} has {len(sizes)} blocks > max_block_id {m.max_block_id}")
        if int(ex.degrees.max(initial=0)) > m.max_degree:
            raise ConfigError(f"graph {ex.index} has block degree {int(ex.degrees.max())} > max_degree {m.max_degree}")
