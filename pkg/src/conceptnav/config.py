"""Run configuration: one JSON file drives training, evaluation, and
ablations. Parse -> serialize -> parse is exact."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .knowledge import DEFAULT_RELATIONS


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    # model
    dim: int = 96
    n_heads: int = 12
    n_layers: int = 2
    text_layers: int = 2
    ff_mult: int = 2
    embed_dim: int = 64
    max_len: int = 32
    top_k: int = 10
    relation_set: tuple[str, ...] = DEFAULT_RELATIONS
    seed: int = 7
    # environments
    n_train_envs: int = 50
    n_val_envs: int = 10
    val_episodes: int = 100
    n_nodes: int = 12
    n_rooms: int = 5
    object_density: float = 3.0
    min_hops: int = 1
    max_hops: int = 4
    max_steps: int = 15
    noise_scale: float = 0.5
    # training
    iterations: int = 2000
    lr: float = 1e-3
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    sigma: float = 1.0
    checkpoint_every: int = 500
    snapshot: str | None = None  # None -> packaged default snapshot

    def validate(self) -> "RunConfig":
        problems = []
        if self.dim <= 0 or self.n_heads <= 0:
            problems.append(f"dim/n_heads must be positive ({self.dim}/{self.n_heads})")
        elif self.dim % self.n_heads != 0:
            problems.append(f"dim {self.dim} not divisible by n_heads {self.n_heads}")
        if self.top_k < 0:
            problems.append(f"top_k must be >= 0, got {self.top_k}")
        if self.iterations < 1:
            problems.append(f"iterations must be >= 1, got {self.iterations}")
        if self.n_nodes < 2:
            problems.append(f"n_nodes must be >= 2, got {self.n_nodes}")
        if not 1 <= self.n_rooms <= self.n_nodes:
            problems.append(f"n_rooms {self.n_rooms} out of range [1, {self.n_nodes}]")
        if self.n_train_envs < 1 or self.n_val_envs < 1:
            problems.append("need at least one train and one val environment")
        if not 0.0 <= self.sigma <= 1.0:
            problems.append(f"sigma must be in [0, 1], got {self.sigma}")
        if len(self.loss_weights) != 3:
            problems.append("loss_weights must have exactly 3 entries")
        if self.snapshot is not None and not Path(self.snapshot).exists():
            problems.append(f"snapshot path does not exist: {self.snapshot}")
        if problems:
            raise ConfigError(problems)
        return self

    def to_json(self) -> str:
        doc = asdict(self)
        doc["relation_set"] = list(self.relation_set)
        doc["loss_weights"] = list(self.loss_weights)
        return json.dumps(doc, sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError([f"unknown config field: {u}" for u in unknown])
        kwargs = dict(doc)
        if "relation_set" in kwargs:
            kwargs["relation_set"] = tuple(kwargs["relation_set"])
        if "loss_weights" in kwargs:
            kwargs["loss_weights"] = tuple(kwargs["loss_weights"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
