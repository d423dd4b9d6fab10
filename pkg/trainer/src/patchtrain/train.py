"""Training loop: prove the arrangement task is learnable from shards."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .model import build_model
from .optim import apply_wv, build_sgd, schedule_factor, set_lr
from .shards import load_manifest, load_split

__all__ = ["TrainerConfig", "DivergenceError", "train_eval"]

# Full-scale reference protocol (not the toy defaults below): 750k iterations,
# batch 128, lr 0.01, step size 300k, gamma 0.1; the non-normalized variant
# ran 1.5M iterations at lr 0.00666 with step 10k, gamma 0.96806.


@dataclass
class TrainerConfig:
    shards_manifest: str
    batch_size: int = 128
    base_lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0002
    lr_policy: str = "step"  # "step" or "poly"
    step_size: int = 300_000
    gamma: float = 0.1
    poly_power: float = 0.5
    iterations: int = 5000
    wv_multipliers: list[float] | None = None
    pad_input: bool = False  # 5-pixel input padding, off by default
    seed: int = 0
    eval_interval: int = 200
    permute_labels: bool = False  # negative control
    results_path: str | None = None


class DivergenceError(RuntimeError):
    """Loss became non-finite during training."""


def _to_batch(patches: np.ndarray) -> list[torch.Tensor]:
    # (B, 3, 96, 96, 3) uint8 -> three (B, 3, 96, 96) float tensors in [0, 1]
    t = torch.from_numpy(patches).float().div_(255.0).permute(0, 1, 4, 2, 3)
    return [t[:, i].contiguous() for i in range(3)]


@torch.no_grad()
def _accuracy(model, patches, labels, batch_size=256) -> float:
    if len(labels) == 0:
        raise ValueError("empty evaluation split")
    model.eval()
    hits = 0
    for start in range(0, len(labels), batch_size):
        chunk = patches[start : start + batch_size]
        p1, p2, p3 = _to_batch(chunk)
        logits = model(p1, p2, p3)
        hits += (logits.argmax(dim=1).numpy() == labels[start : start + batch_size]).sum()
    model.train()
    return float(hits) / float(len(labels))


def train_eval(cfg: TrainerConfig) -> dict:
    """Train on the manifest's shards, report top-1 accuracy on the holdout.

    Returns the results document (also written to cfg.results_path when set):
    loss/accuracy per eval interval, the final accuracy, and a divergence
    marker kept distinct from ordinary failures.
    """
    manifest = load_manifest(cfg.shards_manifest)
    train_x, train_y, eval_x, eval_y = load_split(manifest)
    if len(train_y) == 0:
        raise ValueError("no training records in manifest")
    class_count = manifest["class_space"]["num_classes"]

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    if cfg.permute_labels:
        train_y = train_y[rng.permutation(len(train_y))]

    model = build_model(class_count, pad_input=cfg.pad_input)
    optimizer = build_sgd(model, cfg.base_lr, cfg.momentum, cfg.weight_decay)
    if cfg.wv_multipliers is not None:
        apply_wv(optimizer, cfg.wv_multipliers)
    loss_fn = nn.CrossEntropyLoss()

    n = len(train_y)
    points = []
    diverged = False
    cursor = 0
    order = np.arange(n)  # epoch order follows shard order
    model.train()
    try:
        for it in range(cfg.iterations):
            if cursor + cfg.batch_size > n:
                cursor = 0
            batch_idx = order[cursor : cursor + cfg.batch_size]
            cursor += cfg.batch_size
            p1, p2, p3 = _to_batch(train_x[batch_idx])
            target = torch.from_numpy(train_y[batch_idx])

            set_lr(optimizer, schedule_factor(
                cfg.lr_policy, it, step_size=cfg.step_size, gamma=cfg.gamma,
                power=cfg.poly_power, max_iterations=cfg.iterations,
            ))
            optimizer.zero_grad()
            loss = loss_fn(model(p1, p2, p3), target)
            loss_value = float(loss.detach())
            if not math.isfinite(loss_value):
                raise DivergenceError(f"loss is {loss_value} at iteration {it}")
            loss.backward()
            optimizer.step()

            if (it + 1) % cfg.eval_interval == 0 or it + 1 == cfg.iterations:
                acc = _accuracy(model, eval_x, eval_y)
                points.append({"iteration": it + 1, "loss": loss_value, "eval_accuracy": acc})
    except DivergenceError as exc:
        diverged = True
        points.append({"iteration": len(points) * cfg.eval_interval, "error": str(exc)})

    final_accuracy = points[-1].get("eval_accuracy") if points and not diverged else None
    if cfg.iterations == 0 or final_accuracy is None and not diverged:
        final_accuracy = _accuracy(model, eval_x, eval_y)

    results = {
        "class_count": class_count,
        "train_records": int(n),
        "eval_records": int(len(eval_y)),
        "iterations": cfg.iterations,
        "permuted_labels": cfg.permute_labels,
        "diverged": diverged,
        "points": points,
        "final_accuracy": final_accuracy,
    }
    if cfg.results_path:
        Path(cfg.results_path).write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")
    return results
