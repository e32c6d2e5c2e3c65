"""Command-line entry points: build-kb, train, eval, ablate, inspect."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .env import build_vocabulary
from .knowledge import MalformedLineError, ingest_snapshot
from .metrics import MetricsReport, write_csv
from .model import export_step_attention
from .training import (
    VARIANTS,
    EncoderPool,
    apply_variant,
    evaluate_checkpoint,
    evaluate_policy,
    load_split,
    load_store,
    make_split,
    model_from_checkpoint,
    train,
    val_env_seeds,
    write_split,
)


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "top_k", None) is not None:
        config.top_k = args.top_k
    if getattr(args, "snapshot", None):
        config.snapshot = args.snapshot
    return config


def cmd_build_kb(args) -> int:
    try:
        store = ingest_snapshot(
            args.snapshot, strict=args.strict
        ) if args.relations is None else ingest_snapshot(
            args.snapshot, tuple(args.relations.split(",")), strict=args.strict
        )
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except MalformedLineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    summary = {
        "triples": len(store),
        "relations": store.relation_counts(),
        "skipped": store.skipped,
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def cmd_train(args) -> int:
    try:
        config = _load_config(args).validate()
    except (ConfigError, FileNotFoundError) as err:
        print(f"error: invalid config: {err}", file=sys.stderr)
        return 1
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.to_json() + "\n", encoding="utf-8")
    write_split(
        out_dir / "val_split.json",
        make_split(
            config,
            val_env_seeds(config),
            max(1, config.val_episodes // config.n_val_envs),
        ),
    )
    started = time.monotonic()

    def progress(it, record):
        print(
            f"iter {it}/{config.iterations} total={record['total']:.4f}",
            file=sys.stderr,
        )

    result = train(config, out_dir, variant=args.variant or "topk10", progress=progress)
    elapsed = time.monotonic() - started
    print(f"trained in {elapsed:.1f}s", file=sys.stderr)
    print(
        json.dumps(
            {
                "iterations": config.iterations,
                "final_total": result.losses[-1]["total"],
                "checkpoint": str(result.checkpoint_path),
                "loss_log": str(result.loss_log_path),
                "val_split": str(out_dir / "val_split.json"),
            },
            sort_keys=True,
            indent=2,
        )
    )
    return 0


def cmd_eval(args) -> int:
    checkpoint = Path(args.checkpoint)
    if not checkpoint.exists():
        print(f"error: checkpoint not found: {checkpoint}", file=sys.stderr)
        return 2
    split_path = Path(args.split)
    if not split_path.exists():
        print(f"error: split file not found: {split_path}", file=sys.stderr)
        return 2
    pairs = load_split(split_path)
    reports = evaluate_checkpoint(checkpoint, pairs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "eval_model.csv", reports["model"])
    write_csv(out_dir / "eval_random.csv", reports["random"])
    write_csv(out_dir / "eval_demonstrator.csv", reports["demonstrator"])
    print(
        json.dumps(
            {name: json.loads(rep.to_json()) for name, rep in reports.items()},
            sort_keys=True,
            indent=2,
        )
    )
    return 0


def cmd_ablate(args) -> int:
    try:
        config = _load_config(args).validate()
    except ConfigError as err:
        print(f"error: invalid config: {err}", file=sys.stderr)
        return 1
    variants = args.variant or ["topk10", "topk0", "no-kgs-bias"]
    for v in variants:
        if v not in VARIANTS:
            print(
                f"error: unknown variant {v!r}; choose from {', '.join(VARIANTS)}",
                file=sys.stderr,
            )
            return 1
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = [config.seed + i for i in range(args.seeds)]

    rows = {}
    for variant in variants:
        per_seed = []
        for seed in seeds:
            run_cfg = apply_variant(config, variant)
            run_cfg.seed = seed
            run_dir = out_dir / f"{variant}_seed{seed}"
            result = train(run_cfg, run_dir, variant=variant)
            split = make_split(
                run_cfg,
                val_env_seeds(run_cfg),
                max(1, run_cfg.val_episodes // run_cfg.n_val_envs),
            )
            write_split(run_dir / "val_split.json", split)
            pairs = load_split(run_dir / "val_split.json")
            reports = evaluate_checkpoint(result.checkpoint_path, pairs)
            per_seed.append(reports["model"])
            print(
                f"{variant} seed={seed} SR={reports['model'].SR:.3f}",
                file=sys.stderr,
            )
        rows[variant] = per_seed

    header = "variant," + MetricsReport.csv_header()
    lines = [header]
    means = {}
    for variant, reps in rows.items():
        mean = {
            col: float(np.mean([getattr(r, col) for r in reps]))
            for col in MetricsReport.csv_header().split(",")
        }
        means[variant] = mean
        lines.append(variant + "," + ",".join(f"{mean[c]:.6f}" for c in mean))
    (out_dir / "ablation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    checks = {}
    if "topk10" in means and "topk0" in means:
        checks["topk10_ge_topk0"] = means["topk10"]["SR"] >= means["topk0"]["SR"]
    if "topk10" in means and "no-kgs-bias" in means:
        checks["full_ge_no_kgs_bias"] = (
            means["topk10"]["SR"] >= means["no-kgs-bias"]["SR"]
        )
    report = {
        "seeds": seeds,
        "mean_SR": {v: means[v]["SR"] for v in means},
        "ordering_checks": checks,
        "ordering_holds": all(checks.values()) if checks else None,
        "csv": str(out_dir / "ablation.csv"),
    }
    (out_dir / "ablation_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2), encoding="utf-8"
    )
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_inspect(args) -> int:
    checkpoint = Path(args.checkpoint)
    if not checkpoint.exists():
        print(f"error: checkpoint not found: {checkpoint}", file=sys.stderr)
        return 2
    split_path = Path(args.split)
    if not split_path.exists():
        print(f"error: split file not found: {split_path}", file=sys.stderr)
        return 2
    try:
        model, config, _variant = model_from_checkpoint(checkpoint)
    except (ValueError, KeyError) as err:
        print(f"error: cannot load checkpoint: {err}", file=sys.stderr)
        return 2
    pairs = load_split(split_path)
    if not 0 <= args.episode_index < len(pairs):
        print(
            f"error: episode index {args.episode_index} out of range "
            f"(split has {len(pairs)})",
            file=sys.stderr,
        )
        return 2
    env, episode = pairs[args.episode_index]

    from .policy import ModelPolicy  # local import to keep CLI import light

    store = load_store(config)
    from .embedding import HashTextEmbedder

    encoders = EncoderPool(
        store, HashTextEmbedder(config.embed_dim), config.top_k, config.noise_scale
    )
    policy = ModelPolicy(model, encoders, sigma=config.sigma)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # step manually so both decision scores and attention matrices get kept
    from .env import rollout

    trace = []
    policy_steps = []

    class TracingPolicy:
        def reset(self, e, ep):
            policy.reset(e, ep)

        def act(self, node):
            result = policy.act(node)
            policy_steps.append((node, result))
            return result

    traj = rollout(env, episode, TracingPolicy(), mode="argmax")
    weight_rows = ["step,candidate,concept,weight"]
    for step, (node, result) in enumerate(policy_steps):
        records = export_step_attention(step, result.step_scores)
        correlations = []
        for cand, mat in enumerate(result.encoding.kgs_matrices):
            concept_corr = mat[1:, 1:]  # drop the history row/column
            correlations.append(
                {
                    "candidate": cand,
                    "concepts": list(result.encoding.concept_labels[cand]),
                    "matrix": [[float(x) for x in row] for row in concept_corr],
                }
            )
        for rec in records:
            for concept, weight in zip(rec["concepts"], rec["weights"]):
                weight_rows.append(f"{step},{rec['candidate']},{concept},{weight:.6f}")
        trace.append(
            {
                "step": step,
                "node": node,
                "records": records,
                "concept_correlations": correlations,
            }
        )
    doc = {
        "episode": json.loads(episode.to_json()),
        "trajectory": list(traj.nodes),
        "predicted_object": traj.predicted_object,
        "steps": trace,
    }
    (out_dir / "inspect.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2), encoding="utf-8"
    )
    (out_dir / "inspect_weights.csv").write_text(
        "\n".join(weight_rows) + "\n", encoding="utf-8"
    )
    print(
        json.dumps(
            {
                "steps": len(trace),
                "trajectory": list(traj.nodes),
                "json": str(out_dir / "inspect.json"),
                "csv": str(out_dir / "inspect_weights.csv"),
            },
            sort_keys=True,
            indent=2,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conceptnav",
        description="Commonsense-graph navigation on synthetic connectivity graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kb", help="ingest a knowledge snapshot and summarize it")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--relations", help="comma-separated relation set override")
    p.set_defaults(func=cmd_build_kb)

    p = sub.add_parser("train", help="imitation-train the navigation model")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--snapshot")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train/evaluate ablation variants")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--snapshot")
    p.add_argument("--variant", action="append")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("inspect", help="dump per-step attention for one episode")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--episode-index", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
