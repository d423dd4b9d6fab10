"""Offline 24-variant augmentation: hue rotation by channel swap plus tiny
perspective jitter.

Each input image yields exactly 24 outputs with a fixed composition: 4
untouched repeats, 8 jitter-only, 6 hue-only, and 6 hue+jitter variants
(14 jittered, 12 hue-rotated in total). The census is structural: slots in
the plan are preassigned, only the hue permutation and the jitter angles are
random.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import caraug_rng

__all__ = [
    "CHANNEL_PERMS",
    "PlanEntry",
    "CarAugPlan",
    "hue_rotate",
    "perspective_jitter",
    "augment_24",
    "run_caraug",
]

DEFAULT_ANGLE_BOUND_DEG = 0.00286

# All six channel permutations; id 0 is the identity.
CHANNEL_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))

# Plan slots: 0-3 identity repeats, 4-11 jitter only, 12-17 hue only,
# 18-23 hue plus jitter.
_IDENTITY_SLOTS = range(0, 4)
_JITTER_ONLY_SLOTS = range(4, 12)
_HUE_ONLY_SLOTS = range(12, 18)
_BOTH_SLOTS = range(18, 24)

PLAN_FORMAT = "caraug-plan/1"


@dataclass(frozen=True)
class PlanEntry:
    hue_perm: int  # index into CHANNEL_PERMS, 0 = identity
    jitter: bool


@dataclass(frozen=True)
class CarAugPlan:
    entries: tuple[PlanEntry, ...]

    def __post_init__(self):
        if len(self.entries) != 24:
            raise ValueError(f"a plan has exactly 24 entries, got {len(self.entries)}")
        census = self.census()
        if census != (14, 12, 6, 4):
            raise ValueError(f"plan census must be 14/12/6/4, got {census}")

    def census(self) -> tuple[int, int, int, int]:
        """(jittered, hue-rotated, both, identity) counts."""
        jitter = sum(e.jitter for e in self.entries)
        hue = sum(e.hue_perm != 0 for e in self.entries)
        both = sum(e.jitter and e.hue_perm != 0 for e in self.entries)
        identity = sum(not e.jitter and e.hue_perm == 0 for e in self.entries)
        return jitter, hue, both, identity


def hue_rotate(img: np.ndarray, perm: int) -> np.ndarray:
    """Swap color channels: output channel i takes input channel perm[i]."""
    if not 0 <= perm < len(CHANNEL_PERMS):
        raise ValueError(f"permutation id must be 0..5, got {perm}")
    return np.ascontiguousarray(img[..., list(CHANNEL_PERMS[perm])])


def _rotation_matrix(rx: float, ry: float, rz: float) -> np.ndarray:
    """Rz @ Ry @ Rx for Euler angles in radians."""
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


def jitter_homography(width: int, height: int, angles_deg, focal: float | None = None) -> np.ndarray:
    """Homography K R K^-1 for a pinhole camera rotated about the image center.

    The focal length defaults to max(width, height); exposed because the
    camera model is a convention, not a given.
    """
    if focal is None:
        focal = float(max(width, height))
    rx, ry, rz = (math.radians(a) for a in angles_deg)
    rot = _rotation_matrix(rx, ry, rz)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    k = np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]])
    k_inv = np.array(
        [[1.0 / focal, 0.0, -cx / focal], [0.0, 1.0 / focal, -cy / focal], [0.0, 0.0, 1.0]]
    )
    return k @ rot @ k_inv


def warp_homography(img: np.ndarray, h_matrix: np.ndarray) -> np.ndarray:
    """Inverse-mapped bilinear warp with edge clamping; size is unchanged."""
    height, width = img.shape[:2]
    h_inv = np.linalg.inv(h_matrix)
    ys, xs = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    ones = np.ones_like(xs)
    src = np.einsum("ij,jhw->ihw", h_inv, np.stack([xs, ys, ones]))
    sx = src[0] / src[2]
    sy = src[1] / src[2]
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    fx = sx - x0
    fy = sy - y0
    x0c = np.clip(x0, 0, width - 1)
    x1c = np.clip(x0 + 1, 0, width - 1)
    y0c = np.clip(y0, 0, height - 1)
    y1c = np.clip(y0 + 1, 0, height - 1)
    f = img.astype(np.float64)
    top = f[y0c, x0c] * (1 - fx)[..., None] + f[y0c, x1c] * fx[..., None]
    bot = f[y1c, x0c] * (1 - fx)[..., None] + f[y1c, x1c] * fx[..., None]
    out = top * (1 - fy)[..., None] + bot * fy[..., None]
    return np.rint(np.clip(out, 0.0, 255.0)).astype(np.uint8)


def perspective_jitter(
    img: np.ndarray,
    rng: np.random.Generator,
    angle_bound: float = DEFAULT_ANGLE_BOUND_DEG,
) -> np.ndarray:
    """Perturb three Euler angles within +/- angle_bound degrees and warp.

    At the default bound the corner displacement is far below a pixel; the
    bound is exposed because such a small perturbation is only meaningful if
    the caller can widen it.
    """
    if angle_bound <= 0:
        raise ValueError("angle_bound must be positive")
    angles = rng.uniform(-angle_bound, angle_bound, size=3)
    h_matrix = jitter_homography(img.shape[1], img.shape[0], angles)
    return warp_homography(img, h_matrix)


def max_corner_displacement(width: int, height: int, angle_bound: float) -> float:
    """Analytic bound check: worst corner shift over the 8 extreme angle sign
    combinations (the displacement is monotone in each angle at this scale)."""
    corners = np.array(
        [[0, 0, 1], [width - 1, 0, 1], [0, height - 1, 1], [width - 1, height - 1, 1]],
        dtype=np.float64,
    ).T
    worst = 0.0
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                h_matrix = jitter_homography(
                    width, height, (sx * angle_bound, sy * angle_bound, sz * angle_bound)
                )
                mapped = h_matrix @ corners
                mapped = mapped[:2] / mapped[2]
                disp = np.hypot(*(mapped - corners[:2]))
                worst = max(worst, float(disp.max()))
    return worst


def augment_24(
    img: np.ndarray,
    rng: np.random.Generator,
    angle_bound: float = DEFAULT_ANGLE_BOUND_DEG,
) -> tuple[list[np.ndarray], CarAugPlan]:
    """Produce the 24 variants of one image plus the plan that made them.

    Hue permutations for the 12 hue slots are drawn uniformly from the five
    non-identity permutations; jitter angles are drawn per jittered slot, in
    slot order.
    """
    entries: list[PlanEntry] = []
    outputs: list[np.ndarray] = []
    for slot in range(24):
        jitter = slot in _JITTER_ONLY_SLOTS or slot in _BOTH_SLOTS
        if slot in _HUE_ONLY_SLOTS or slot in _BOTH_SLOTS:
            perm = 1 + int(rng.integers(0, 5))
        else:
            perm = 0
        entries.append(PlanEntry(hue_perm=perm, jitter=jitter))
        out = hue_rotate(img, perm) if perm else img.copy()
        if jitter:
            out = perspective_jitter(out, rng, angle_bound)
        outputs.append(out)
    return outputs, CarAugPlan(entries=tuple(entries))


def run_caraug(input_dir, output_dir, seed: int, angle_bound: float = DEFAULT_ANGLE_BOUND_DEG) -> int:
    """Augment a directory of images; returns the number of inputs processed.

    Outputs are named <stem>_v00..v23.png with a <stem>_plan.json sidecar.
    Randomness is keyed per (seed, input index) so the run is reproducible
    and order-independent.
    """
    from PIL import Image

    from .pipeline import ingest, load_image

    listing = ingest(input_dir)
    out_root = Path(output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    for index, rel in enumerate(listing.entries):
        img = load_image(listing.path(index))
        rng = caraug_rng(seed, index)
        variants, plan = augment_24(img, rng, angle_bound)
        stem = Path(rel).stem
        for v, out in enumerate(variants):
            Image.fromarray(out).save(out_root / f"{stem}_v{v:02d}.png")
        sidecar = {
            "format": PLAN_FORMAT,
            "source": rel,
            "angle_bound_deg": angle_bound,
            "entries": [
                {"variant": v, "hue_perm": e.hue_perm, "jitter": e.jitter}
                for v, e in enumerate(plan.entries)
            ],
        }
        (out_root / f"{stem}_plan.json").write_text(
            json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
        )
    return len(listing.entries)
