"""SGD with per-layer parameter groups, learning-rate varying, and schedules."""

from __future__ import annotations

from decimal import Decimal

import torch

__all__ = ["build_sgd", "apply_wv", "schedule_factor"]


def build_sgd(model, base_lr: float, momentum: float = 0.9, weight_decay: float = 0.0002):
    """One SGD parameter group per trainable layer, in layer order."""
    groups = [
        {"params": params, "lr": base_lr, "name": name}
        for name, params in model.layer_groups()
    ]
    opt = torch.optim.SGD(groups, lr=base_lr, momentum=momentum, weight_decay=weight_decay)
    for group in opt.param_groups:
        group["base_lr"] = base_lr
    return opt


def apply_wv(optimizer, multipliers):
    """Scale each layer's learning rate by its multiplier (in layer order).

    The product is taken in decimal: rates are human-written decimals, and
    0.01 * 0.7 in binary floating point is one ulp away from the 0.007 a
    reader of the schedule expects to see when the rates are read back.
    """
    groups = optimizer.param_groups
    if len(multipliers) != len(groups):
        raise ValueError(
            f"got {len(multipliers)} multipliers for {len(groups)} trainable layers"
        )
    for group, mult in zip(groups, multipliers):
        base = Decimal(repr(group.get("base_lr", group["lr"])))
        group["base_lr"] = float(base * Decimal(repr(mult)))
        group["lr"] = group["base_lr"]
    return optimizer


def schedule_factor(policy: str, iteration: int, *, step_size: int = 300_000,
                    gamma: float = 0.1, power: float = 0.5, max_iterations: int = 1) -> float:
    """Multiplicative learning-rate factor at an iteration.

    step: gamma ** floor(it / step_size); poly: (1 - it/max) ** power.
    """
    if policy == "step":
        return gamma ** (iteration // step_size)
    if policy == "poly":
        frac = min(iteration / max(1, max_iterations), 1.0)
        return (1.0 - frac) ** power
    raise ValueError(f"unknown lr policy {policy!r}")


def set_lr(optimizer, factor: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = group.get("base_lr", group["lr"]) * factor
