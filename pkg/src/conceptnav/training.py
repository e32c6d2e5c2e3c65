"""Imitation training against the shortest-path demonstrator, plus split
files, evaluation drivers, and checkpointing with optimizer state."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .embedding import HashTextEmbedder
from .env import (
    Episode,
    NavEnvironment,
    build_vocabulary,
    default_snapshot_path,
    generate_environment,
    generate_episode,
    rollout,
)
from .knowledge import ingest_snapshot
from .metrics import MetricsReport, compute_metrics
from .model import ConceptNavModel, ModelConfig, losses
from .nn import Adam
from .nn.serialize import FORMAT_VERSION
from .policy import DemonstratorPolicy, ModelPolicy, ObservationEncoder, RandomPolicy

VARIANTS = ("topk10", "topk0", "topk20", "no-kgs-bias", "no-history", "no-cd")

_TRAIN_ENV_STRIDE = 10007
_VAL_ENV_OFFSET = 900001
_EPISODE_STRIDE = 1000003


def model_config_from_run(config: RunConfig, vocab) -> ModelConfig:
    return ModelConfig(
        dim=config.dim,
        n_heads=config.n_heads,
        n_layers=config.n_layers,
        embed_dim=config.embed_dim,
        ff_mult=config.ff_mult,
        text_layers=config.text_layers,
        max_len=config.max_len,
        vocab_size=len(vocab),
        cls_id=vocab.cls_id,
        sep_id=vocab.sep_id,
        seed=config.seed,
    )


def load_store(config: RunConfig):
    path = config.snapshot or default_snapshot_path()
    return ingest_snapshot(path, config.relation_set)


def apply_variant(config: RunConfig, variant: str) -> RunConfig:
    """Variant-adjusted copy of the run config (top-k sweeps)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant: {variant!r} (choose from {VARIANTS})")
    doc = json.loads(config.to_json())
    if variant == "topk0":
        doc["top_k"] = 0
    elif variant == "topk20":
        doc["top_k"] = 20
    elif variant == "topk10":
        doc["top_k"] = 10
    return RunConfig.from_dict(doc)


def configure_model_for_variant(model: ConceptNavModel, variant: str):
    """Apply structural switches; returns the trainable parameter list."""
    model.use_history = variant != "no-history"
    model.use_aggregated = variant != "no-cd"
    frozen_suffixes = ()
    if variant == "no-kgs-bias":
        for block in model.blocks:
            block.kgs.w_a.data[:] = 0.0
            block.kgs.b_a.data[:] = 0.0
        frozen_suffixes = (".w_a", ".b_a")
    return [
        p
        for name, p in model.named_parameters()
        if not any(name.endswith(suf) for suf in frozen_suffixes)
    ]


class EncoderPool:
    """One ObservationEncoder per environment, built lazily."""

    def __init__(self, store, text_embedder, top_k, noise_scale):
        self.store = store
        self.text = text_embedder
        self.top_k = top_k
        self.noise_scale = noise_scale
        self._pool: dict[int, ObservationEncoder] = {}

    def __call__(self, env: NavEnvironment) -> ObservationEncoder:
        enc = self._pool.get(env.seed)
        if enc is None or enc.env is not env:
            enc = ObservationEncoder(
                env, self.store, self.text, self.top_k, self.noise_scale
            )
            self._pool[env.seed] = enc
        return enc


def train_env_seeds(config: RunConfig) -> list[int]:
    return [config.seed * _TRAIN_ENV_STRIDE + i for i in range(config.n_train_envs)]


def val_env_seeds(config: RunConfig) -> list[int]:
    return [
        config.seed * _TRAIN_ENV_STRIDE + _VAL_ENV_OFFSET + j
        for j in range(config.n_val_envs)
    ]


def make_environment(config: RunConfig, seed: int) -> NavEnvironment:
    return generate_environment(
        seed,
        n_nodes=config.n_nodes,
        n_rooms=config.n_rooms,
        object_density=config.object_density,
    )


# ---------------------------------------------------------------------------
# split files
# ---------------------------------------------------------------------------
def make_split(config: RunConfig, env_seeds, episodes_per_env: int) -> dict:
    entries = []
    for env_seed in env_seeds:
        for j in range(episodes_per_env):
            entries.append(
                {"env_seed": env_seed, "episode_seed": env_seed * 31 + 7 * j + 1}
            )
    return {
        "schema_version": 1,
        "env_params": {
            "n_nodes": config.n_nodes,
            "n_rooms": config.n_rooms,
            "object_density": config.object_density,
        },
        "episode_params": {
            "min_hops": config.min_hops,
            "max_hops": config.max_hops,
            "max_steps": config.max_steps,
        },
        "entries": entries,
    }


def write_split(path, split: dict) -> None:
    Path(path).write_text(json.dumps(split, sort_keys=True, indent=2), encoding="utf-8")


def load_split(path, vocab=None):
    """Regenerate (environments, episodes) from a split file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != 1:
        raise ValueError(f"unsupported split schema in {path}")
    vocab = vocab or build_vocabulary()
    ep_params = doc["episode_params"]
    env_params = doc["env_params"]
    env_cache: dict[int, NavEnvironment] = {}
    pairs = []
    for entry in doc["entries"]:
        env_seed = entry["env_seed"]
        env = env_cache.get(env_seed)
        if env is None:
            env = generate_environment(
                env_seed,
                n_nodes=env_params["n_nodes"],
                n_rooms=env_params["n_rooms"],
                object_density=env_params["object_density"],
            )
            env_cache[env_seed] = env
        episode = generate_episode(
            env,
            entry["episode_seed"],
            vocab=vocab,
            min_hops=ep_params["min_hops"],
            max_hops=ep_params["max_hops"],
            max_steps=ep_params["max_steps"],
        )
        pairs.append((env, episode))
    return pairs


# ---------------------------------------------------------------------------
# checkpoints with optimizer state
# ---------------------------------------------------------------------------
def save_training_checkpoint(path, model, optimizer, iteration, config: RunConfig, variant: str):
    doc = {
        "format_version": FORMAT_VERSION,
        "config": json.loads(config.to_json()),
        "variant": variant,
        "iteration": iteration,
        "params": {
            name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
            for name, p in model.named_parameters()
        },
        "optimizer": {
            "t": optimizer.t,
            "m": [m.reshape(-1).tolist() for m in optimizer.m],
            "v": [v.reshape(-1).tolist() for v in optimizer.v],
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_training_checkpoint(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    return doc


def restore_model(doc, model: ConceptNavModel):
    own = dict(model.named_parameters())
    saved = doc["params"]
    missing = sorted(set(own) - set(saved))
    extra = sorted(set(saved) - set(own))
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing={missing} extra={extra}")
    for name, tensor in own.items():
        entry = saved[name]
        tensor.data = np.asarray(entry["values"], dtype=np.float64).reshape(
            entry["shape"]
        )


def model_from_checkpoint(path):
    """(model, RunConfig, variant) ready for evaluation."""
    doc = load_training_checkpoint(path)
    config = RunConfig.from_dict(doc["config"])
    vocab = build_vocabulary()
    model = ConceptNavModel(model_config_from_run(config, vocab))
    variant = doc.get("variant", "topk10")
    configure_model_for_variant(model, variant)
    restore_model(doc, model)
    return model, config, variant


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------
@dataclass
class TrainResult:
    checkpoint_path: Path
    loss_log_path: Path
    losses: list[dict]


def train(config: RunConfig, out_dir, variant: str = "topk10", progress=None) -> TrainResult:
    """Teacher-forced imitation training, deterministic in config.seed.

    Iteration i trains on environment i mod n_train_envs with an episode
    seeded by (seed, i); losses follow the demonstrator's action at every
    step. Checkpoints (with optimizer state) land in out_dir and training
    resumes from the newest one when present.
    """
    config = apply_variant(config, variant).validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.json"
    log_path = out_dir / "loss_log.jsonl"

    vocab = build_vocabulary()
    model = ConceptNavModel(model_config_from_run(config, vocab))
    trainable = configure_model_for_variant(model, variant)
    optimizer = Adam(trainable, lr=config.lr)
    store = load_store(config)
    text_embedder = HashTextEmbedder(config.embed_dim)
    encoders = EncoderPool(store, text_embedder, config.top_k, config.noise_scale)
    policy = ModelPolicy(model, encoders, sigma=config.sigma, record=True)

    envs = [make_environment(config, s) for s in train_env_seeds(config)]

    start_iter = 0
    log_lines: list[str] = []
    if ckpt_path.exists():
        doc = load_training_checkpoint(ckpt_path)
        if doc["config"] == json.loads(config.to_json()) and doc["variant"] == variant:
            restore_model(doc, model)
            optimizer.t = doc["optimizer"]["t"]
            optimizer.m = [
                np.asarray(m, dtype=np.float64).reshape(p.data.shape)
                for m, p in zip(doc["optimizer"]["m"], optimizer.params)
            ]
            optimizer.v = [
                np.asarray(v, dtype=np.float64).reshape(p.data.shape)
                for v, p in zip(doc["optimizer"]["v"], optimizer.params)
            ]
            start_iter = doc["iteration"]
            if log_path.exists():
                log_lines = log_path.read_text(encoding="utf-8").splitlines()[:start_iter]

    records = [json.loads(line) for line in log_lines]
    for it in range(start_iter + 1, config.iterations + 1):
        env = envs[(it - 1) % len(envs)]
        episode = generate_episode(
            env,
            config.seed * _EPISODE_STRIDE + it,
            vocab=vocab,
            min_hops=config.min_hops,
            max_hops=config.max_hops,
            max_steps=config.max_steps,
        )
        traj = rollout(env, episode, policy, mode="teacher")
        final_scores = traj.step_scores[-1]
        target_index = final_scores.object_labels.index(episode.target_object)
        l_sap, l_og, l_cd, total = losses(
            traj.step_scores,
            traj.demo_indices,
            target_index,
            sigma=config.sigma,
            weights=config.loss_weights,
        )
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        record = {
            "iteration": it,
            "loss_sap": l_sap.item(),
            "loss_og": l_og.item(),
            "loss_cd": l_cd.item(),
            "total": total.item(),
            "steps": len(traj.demo_indices),
        }
        records.append(record)
        log_lines.append(json.dumps(record, sort_keys=True))
        if progress is not None and it % 100 == 0:
            progress(it, record)
        if it % config.checkpoint_every == 0 or it == config.iterations:
            save_training_checkpoint(ckpt_path, model, optimizer, it, config, variant)
            log_path.write_text("\n".join(log_lines) + "\n", encoding="utf-8")

    if not log_lines:
        raise RuntimeError("training produced no iterations")
    log_path.write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return TrainResult(checkpoint_path=ckpt_path, loss_log_path=log_path, losses=records)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------
def evaluate_policy(policy, pairs, mode: str = "argmax") -> tuple[MetricsReport, list]:
    trajectories = []
    for env, episode in pairs:
        trajectories.append(rollout(env, episode, policy, mode=mode))
    report = compute_metrics(
        trajectories,
        [ep for _, ep in pairs],
        [env for env, _ in pairs],
    )
    return report, trajectories


def evaluate_checkpoint(checkpoint_path, pairs):
    """Model + the two reference baselines on the same episode pairs."""
    model, config, variant = model_from_checkpoint(checkpoint_path)
    store = load_store(config)
    text_embedder = HashTextEmbedder(config.embed_dim)
    encoders = EncoderPool(store, text_embedder, config.top_k, config.noise_scale)
    policy = ModelPolicy(model, encoders, sigma=config.sigma)
    model_report, _ = evaluate_policy(policy, pairs)
    random_report, _ = evaluate_policy(RandomPolicy(seed=config.seed), pairs)
    demo_report, _ = evaluate_policy(DemonstratorPolicy(), pairs)
    return {"model": model_report, "random": random_report, "demonstrator": demo_report}
