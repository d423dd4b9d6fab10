"""Class-label algebra: bijection between (configuration, rotation) and class id.

Labels are rotation-major (class = rot_index * 20 + config_id), so the
zero-rotation subspace keeps the bare catalog labels and stays comparable
when rotation classes are toggled off.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ClassSpace", "encode", "decode", "ROTATION_DEGREES"]

# Index order is fixed: 4-rotation spaces use (0, 90, 180, 270) degrees
# counter-clockwise; 2-rotation spaces use (0, 180).
ROTATION_DEGREES = {1: (0,), 2: (0, 180), 4: (0, 90, 180, 270)}


@dataclass(frozen=True)
class ClassSpace:
    num_configs: int = 20
    num_rots: int = 1

    def __post_init__(self):
        if self.num_configs != 20:
            raise ValueError(f"class space is built over 20 configurations, got {self.num_configs}")
        if self.num_rots not in (1, 2, 4):
            raise ValueError(f"rotation count must be 1, 2 or 4, got {self.num_rots}")

    @property
    def num_classes(self) -> int:
        return self.num_configs * self.num_rots

    def rot_indices(self) -> tuple[int, ...]:
        # Quarter-turn counts matching ROTATION_DEGREES order.
        return {1: (0,), 2: (0, 2), 4: (0, 1, 2, 3)}[self.num_rots]


def encode(config_id: int, rot_index: int, space: ClassSpace) -> int:
    """Map (config, quarter-turn count) to a class id."""
    if not 0 <= config_id < space.num_configs:
        raise ValueError(f"config_id {config_id} out of range 0..{space.num_configs - 1}")
    slot = _rot_slot(rot_index, space)
    return slot * space.num_configs + config_id


def decode(class_id: int, space: ClassSpace) -> tuple[int, int]:
    """Exact inverse of encode: class id back to (config, quarter-turns)."""
    if not 0 <= class_id < space.num_classes:
        raise ValueError(f"class_id {class_id} out of range 0..{space.num_classes - 1}")
    slot, config_id = divmod(class_id, space.num_configs)
    return config_id, space.rot_indices()[slot]


def _rot_slot(rot_index: int, space: ClassSpace) -> int:
    indices = space.rot_indices()
    try:
        return indices.index(rot_index)
    except ValueError:
        raise ValueError(
            f"rot_index {rot_index} not valid in a {space.num_rots}-rotation space {indices}"
        ) from None
