"""Triple-branch shared-weight classifier over three 96x96 patches.

One small convolutional trunk (four stride-2 stages, batch norm, global
average pooling) is applied to each patch; because it is the same module,
the weights are literally shared and gradients from all three patches
accumulate into one set of parameters. The three embeddings are concatenated
and pushed through two joined fully connected stages.
"""

from __future__ import annotations

import torch
from torch import nn

__all__ = ["TripleBranchClassifier", "build_model", "VALID_CLASS_COUNTS"]

VALID_CLASS_COUNTS = (20, 40, 80)


class TripleBranchClassifier(nn.Module):
    def __init__(self, class_count: int, pad_input: bool = False):
        super().__init__()
        self.pad_input = pad_input
        self.pad = nn.ZeroPad2d(5) if pad_input else nn.Identity()
        chans = (16, 32, 48, 64)
        stages = []
        prev = 3
        for c in chans:
            stages += [
                nn.Conv2d(prev, c, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(c),
                nn.ReLU(inplace=True),
            ]
            prev = c
        self.trunk = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc1 = nn.Linear(3 * chans[-1], 128)
        self.fc2 = nn.Linear(128, class_count)

    def embed(self, patch: torch.Tensor) -> torch.Tensor:
        x = self.trunk(self.pad(patch))
        return self.pool(x).flatten(1)

    def forward(self, p1, p2, p3) -> torch.Tensor:
        joined = torch.cat([self.embed(p1), self.embed(p2), self.embed(p3)], dim=1)
        return self.fc2(torch.relu(self.fc1(joined)))

    def layer_groups(self) -> list[tuple[str, list[nn.Parameter]]]:
        """Ordered trainable layers: conv1..conv4 (with their norms), fc1, fc2."""
        groups = []
        convs = [m for m in self.trunk if isinstance(m, nn.Conv2d)]
        norms = [m for m in self.trunk if isinstance(m, nn.BatchNorm2d)]
        for i, (conv, norm) in enumerate(zip(convs, norms), start=1):
            groups.append((f"conv{i}", list(conv.parameters()) + list(norm.parameters())))
        groups.append(("fc1", list(self.fc1.parameters())))
        groups.append(("fc2", list(self.fc2.parameters())))
        return groups


def build_model(class_count: int, pad_input: bool = False) -> TripleBranchClassifier:
    if class_count not in VALID_CLASS_COUNTS:
        raise ValueError(f"class_count must be one of {VALID_CLASS_COUNTS}, got {class_count}")
    return TripleBranchClassifier(class_count, pad_input=pad_input)
