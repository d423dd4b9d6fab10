"""Command-line front end for the shard trainer."""

from __future__ import annotations

import argparse
import json
import sys

from .train import TrainerConfig, train_eval

WV_SIAMESE_9 = [0.7, 0.8, 0.9, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="patchtrain",
        description="Train the toy triple-branch classifier on patch-set shards.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="train and report holdout accuracy")
    t.add_argument("--manifest", required=True)
    t.add_argument("--iters", type=int, default=5000)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--base-lr", type=float, default=0.01)
    t.add_argument("--lr-policy", choices=("step", "poly"), default="step")
    t.add_argument("--wv", action="store_true",
                   help="per-layer learning-rate multipliers peaking mid-network "
                        "(6-layer ramp derived from the 9-layer schedule)")
    t.add_argument("--pad-input", action="store_true", help="5-pixel input padding")
    t.add_argument("--permute-labels", action="store_true", help="negative control")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--eval-interval", type=int, default=200)
    t.add_argument("--results", default=None, help="write the results document here")
    t.set_defaults(func=_cmd_train)
    return p


def _cmd_train(args) -> int:
    wv = None
    if args.wv:
        # ramp up to the middle conv and back down, matching the model's 6 layers
        wv = [0.7, 0.9, 1.0, 0.9, 0.7, 0.5]
    cfg = TrainerConfig(
        shards_manifest=args.manifest,
        batch_size=args.batch_size,
        base_lr=args.base_lr,
        lr_policy=args.lr_policy,
        iterations=args.iters,
        wv_multipliers=wv,
        pad_input=args.pad_input,
        seed=args.seed,
        eval_interval=args.eval_interval,
        permute_labels=args.permute_labels,
        results_path=args.results,
    )
    try:
        results = train_eval(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({k: results[k] for k in ("final_accuracy", "diverged", "class_count")}))
    return 0 if not results["diverged"] else 3


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
