"""Per-sample augmentation stack and its fixed composition order.

One sample is produced by `make_sample` in this order, every stage drawing
from the same per-sample random stream:

    1. rotation class draw, whole-image right-angle rotation
    2. patch extraction and P1..P3 assembly
    3. yoked mirror with config-id remap (part of the zoom/mirror/crop bag)
    4. zoom + yoked 96x96 crop, or plain (yoked or unyoked) 96x96 crop
    5. channel drop (ablation baseline only)
    6. yoked square aperture on two of the three patches

Quantities drawn once per set (crop offset, zoom, aperture, mirror bit,
rotation) apply identically to P1..P3; the per-patch resampling-method draw
is deliberately the only unyoked random.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import labels, patchgrid
from .imgproc import ResampleMethod, resample_window
from .patchgrid import (
    CROP_SIDE,
    FLAG_APERTURE,
    FLAG_CHANNEL_DROP,
    FLAG_CHROMA_BLUR,
    FLAG_MIRROR,
    FLAG_RRM,
    FLAG_UBT,
    ConfigCatalog,
    PatchConfiguration,
    PatchSet,
    random_crop,
    yoked_crop,
)
from .records import SampleRecord

__all__ = [
    "AugmentConfig",
    "ApertureSpec",
    "PRESETS",
    "rotate_image",
    "apply_mirror",
    "apply_ubt_zoom_crop",
    "apply_aperture",
    "apply_channel_drop",
    "layer4_coverage",
    "make_sample",
    "sample_rng",
]

# The four zoom resampling kernels, in draw-index order.
RRM_METHODS = (
    ResampleMethod.BILINEAR,
    ResampleMethod.AREA,
    ResampleMethod.BICUBIC,
    ResampleMethod.LANCZOS,
)

_APERTURE_PAIRS = ((0, 1), (0, 2), (1, 2))

# Stream-kind prefixes for deriving independent random streams from one seed.
_STREAM_SAMPLE = 0
_STREAM_SHUFFLE = 1
_STREAM_CARAUG = 2


@dataclass(frozen=True)
class AugmentConfig:
    """Togglable per-sample transform switches and their parameters.

    Every tool is independent so any ablation condition is expressible:
    chroma blur (cb), yoked jitter (yj), the mirror/zoom/crop bag (ubt),
    randomized rescale methods (rrm), random aperture (ra), and the
    channel-drop baseline (cd). `rotations` counts rotation classes
    (1 = upright only, 2 = adds 180, 4 = adds 90/270).
    """

    enable_cb: bool = True
    enable_yj: bool = True
    enable_ubt: bool = True
    enable_rrm: bool = True
    enable_ra: bool = True
    enable_cd: bool = False
    rotations: int = 4
    aperture_min: int = 64
    aperture_max: int = 96
    zoom_min: int = 96
    zoom_max: int = 128
    fill_rgb: tuple[int, int, int] = (124, 117, 104)
    blur_window: int = 13

    def __post_init__(self):
        if not 64 <= self.aperture_min <= self.aperture_max <= 96:
            raise ValueError(
                f"aperture range must satisfy 64 <= min <= max <= 96, got "
                f"[{self.aperture_min}, {self.aperture_max}]"
            )
        if not 96 <= self.zoom_min <= self.zoom_max:
            raise ValueError(
                f"zoom range must satisfy 96 <= min <= max, got "
                f"[{self.zoom_min}, {self.zoom_max}]"
            )
        if self.rotations not in (1, 2, 4):
            raise ValueError(f"rotations must be 1, 2 or 4, got {self.rotations}")
        if len(self.fill_rgb) != 3 or any(not 0 <= v <= 255 for v in self.fill_rgb):
            raise ValueError(f"fill_rgb must be three bytes, got {self.fill_rgb}")

    def class_space(self) -> labels.ClassSpace:
        return labels.ClassSpace(num_rots=self.rotations)

    def to_dict(self) -> dict:
        return {
            "enable_cb": self.enable_cb,
            "enable_yj": self.enable_yj,
            "enable_ubt": self.enable_ubt,
            "enable_rrm": self.enable_rrm,
            "enable_ra": self.enable_ra,
            "enable_cd": self.enable_cd,
            "rotations": self.rotations,
            "aperture_min": self.aperture_min,
            "aperture_max": self.aperture_max,
            "zoom_min": self.zoom_min,
            "zoom_max": self.zoom_max,
            "fill_rgb": list(self.fill_rgb),
            "blur_window": self.blur_window,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AugmentConfig":
        doc = dict(doc)
        doc["fill_rgb"] = tuple(doc.get("fill_rgb", (124, 117, 104)))
        return cls(**doc)


def _preset(**kw) -> AugmentConfig:
    base = dict(
        enable_cb=False,
        enable_yj=False,
        enable_ubt=False,
        enable_rrm=False,
        enable_ra=False,
        enable_cd=False,
        rotations=1,
    )
    base.update(kw)
    return AugmentConfig(**base)


# Named ablation presets, one per data condition; each row of the ladder
# switches on one more tool. "baseline" is the channel-dropping random-jitter
# protocol. The third-patch and extra-configuration steps are structural
# (they live in the catalog, which always carries all 20 configurations).
PRESETS: dict[str, AugmentConfig] = {
    "baseline": _preset(enable_cd=True),
    "cb": _preset(enable_cb=True),
    "cb+yj": _preset(enable_cb=True, enable_yj=True),
    "cb+yj+ubt": _preset(enable_cb=True, enable_yj=True, enable_ubt=True),
    "cb+yj+ubt+ra": _preset(enable_cb=True, enable_yj=True, enable_ubt=True, enable_ra=True),
    "rwc180": _preset(
        enable_cb=True, enable_yj=True, enable_ubt=True, enable_ra=True, rotations=2
    ),
    "rwc4": _preset(
        enable_cb=True, enable_yj=True, enable_ubt=True, enable_ra=True, rotations=4
    ),
    "full": AugmentConfig(),
}


@dataclass(frozen=True)
class ApertureSpec:
    """A square viewport inside a 96x96 patch; everything outside is filled."""

    side: int
    x: int
    y: int
    targets: tuple[int, int]

    def __post_init__(self):
        if not 64 <= self.side <= CROP_SIDE:
            raise ValueError(f"aperture side must be in [64, 96], got {self.side}")
        if self.x < 0 or self.y < 0 or self.x + self.side > CROP_SIDE or self.y + self.side > CROP_SIDE:
            raise ValueError(f"aperture at ({self.x},{self.y}) side {self.side} leaves the patch")
        if len(self.targets) != 2 or len(set(self.targets)) != 2:
            raise ValueError(f"exactly two distinct target patches required, got {self.targets}")


def sample_rng(seed: int, image_id: int, config_id: int, epoch: int) -> np.random.Generator:
    """Independent counter-derived stream for one (image, config, epoch) key.

    Streams are a pure function of the key, so samples can be generated in
    any order, on any worker, and still come out bit-identical.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(_STREAM_SAMPLE, image_id, config_id, epoch))
    return np.random.Generator(np.random.Philox(ss))


def shuffle_rng(seed: int, epoch: int, split: int = 0) -> np.random.Generator:
    """Per-epoch record-order stream; split 0 is train, 1 the holdout tail."""
    ss = np.random.SeedSequence(seed, spawn_key=(_STREAM_SHUFFLE, epoch, split))
    return np.random.Generator(np.random.Philox(ss))


def caraug_rng(seed: int, image_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(_STREAM_CARAUG, image_index))
    return np.random.Generator(np.random.Philox(ss))


def rotate_image(img: np.ndarray, rot_index: int) -> np.ndarray:
    """Lossless right-angle rotation by rot_index quarter turns (CCW)."""
    if not 0 <= rot_index <= 3:
        raise ValueError(f"rot_index must be 0..3, got {rot_index}")
    if rot_index % 2 == 1 and img.shape[0] != img.shape[1]:
        raise ValueError(
            f"quarter rotations need a square image, got {img.shape[1]}x{img.shape[0]}"
        )
    return np.ascontiguousarray(np.rot90(img, k=rot_index))


def apply_mirror(ps: PatchSet, catalog: ConfigCatalog, rng: np.random.Generator) -> PatchSet:
    """Flip all three patches horizontally with probability 1/2.

    The configuration id is remapped through the catalog's mirror map so the
    label still names the arrangement actually seen; the class count does not
    change.
    """
    if int(rng.integers(0, 2)) == 0:
        return ps
    patches = [np.ascontiguousarray(p[:, ::-1]) for p in ps.patches]
    return replace(
        ps,
        patches=patches,
        config_id=catalog.mirror_of(ps.config_id),
        flags=ps.flags ^ FLAG_MIRROR,
        mirrored=not ps.mirrored,
    )


def apply_ubt_zoom_crop(ps: PatchSet, rng: np.random.Generator, cfg: AugmentConfig) -> PatchSet:
    """Zoom each 110x110 patch to one shared random size, then crop 96x96.

    The target side and crop offset are drawn once per set; when rrm is on,
    each patch independently draws one of the four resampling kernels
    (the sole unyoked random), otherwise bilinear is used throughout.
    """
    _require_side(ps, patchgrid.PATCH_SIDE, "apply_ubt_zoom_crop")
    side = int(rng.integers(cfg.zoom_min, cfg.zoom_max + 1))
    dx = int(rng.integers(0, side - CROP_SIDE + 1))
    dy = int(rng.integers(0, side - CROP_SIDE + 1))
    if cfg.enable_rrm:
        methods = [RRM_METHODS[int(rng.integers(0, 4))] for _ in range(3)]
    else:
        methods = [ResampleMethod.BILINEAR] * 3
    patches = [
        resample_window(patch, side, side, method, dx, dy, CROP_SIDE, CROP_SIDE)
        for patch, method in zip(ps.patches, methods)
    ]
    flags = ps.flags | FLAG_UBT | (FLAG_RRM if cfg.enable_rrm else 0)
    return replace(
        ps,
        patches=patches,
        flags=flags,
        zoom=(side, dx, dy),
        resample_methods=[m.value for m in methods],
    )


def apply_aperture(ps: PatchSet, rng: np.random.Generator, cfg: AugmentConfig) -> PatchSet:
    """Mask two of the three patches outside one shared square aperture.

    Aperture size and position are yoked between the two target patches;
    which two patches are hit is drawn uniformly over the three pairs. The
    third patch is left untouched. Outside pixels take cfg.fill_rgb.
    """
    _require_side(ps, CROP_SIDE, "apply_aperture")
    side = int(rng.integers(cfg.aperture_min, cfg.aperture_max + 1))
    x = int(rng.integers(0, CROP_SIDE - side + 1))
    y = int(rng.integers(0, CROP_SIDE - side + 1))
    targets = _APERTURE_PAIRS[int(rng.integers(0, 3))]
    spec = ApertureSpec(side=side, x=x, y=y, targets=targets)
    fill = np.array(cfg.fill_rgb, dtype=np.uint8)
    patches = list(ps.patches)
    for t in targets:
        masked = np.tile(fill, (CROP_SIDE, CROP_SIDE, 1))
        masked[y : y + side, x : x + side] = patches[t][y : y + side, x : x + side]
        patches[t] = masked
    return replace(ps, patches=patches, flags=ps.flags | FLAG_APERTURE, aperture=spec)


def apply_channel_drop(ps: PatchSet, rng: np.random.Generator, cfg: AugmentConfig) -> PatchSet:
    """Keep one color channel, flatten the other two to the fill color.

    Minimal color-withholding baseline; the kept channel is drawn once per
    set so all three patches lose the same color information.
    """
    keep = int(rng.integers(0, 3))
    patches = []
    for p in ps.patches:
        out = p.copy()
        for ch in range(3):
            if ch != keep:
                out[..., ch] = cfg.fill_rgb[ch]
        patches.append(out)
    return replace(ps, patches=patches, flags=ps.flags | FLAG_CHANNEL_DROP)


def layer4_coverage(side: int, x: int, y: int, *, patch: int = 96, window: int = 48, stride: int = 16) -> int:
    """Count mid-network receptive windows fully visible inside an aperture.

    Brute-force enumeration of 48x48 windows at stride 16 over a 96x96 patch;
    a verification oracle for the aperture floor, not a hot-path function.
    """
    count = 0
    for wy in range(0, patch - window + 1, stride):
        for wx in range(0, patch - window + 1, stride):
            if wx >= x and wy >= y and wx + window <= x + side and wy + window <= y + side:
                count += 1
    return count


def _require_side(ps: PatchSet, side: int, op: str) -> None:
    if ps.patch_side != side:
        raise ValueError(f"{op} expects {side}x{side} patches, got {ps.patch_side}")


def _extract_config_cells(
    planes: tuple[np.ndarray, np.ndarray, np.ndarray],
    catalog: ConfigCatalog,
    config: PatchConfiguration,
) -> dict[tuple[str, int], np.ndarray]:
    """Pull only the three cells one configuration needs (hot path).

    Returns views into the planes; downstream stages either read them
    (resampling) or copy at crop time, so nothing mutates the sources.
    """
    by_side = {p.shape[0]: p for p in planes}
    pool = {}
    for grid_name, cell in config.cells:
        grid = catalog.grids[grid_name]
        plane = by_side.get(grid.image_side)
        if plane is None:
            raise ValueError(f"no source plane of side {grid.image_side} for grid {grid_name!r}")
        x, y = grid.offsets[cell]
        pool[(grid_name, cell)] = plane[y : y + grid.patch_side, x : x + grid.patch_side]
    return pool


def make_patch_set(
    image_planes: tuple[np.ndarray, np.ndarray, np.ndarray],
    config: PatchConfiguration,
    catalog: ConfigCatalog,
    rng: np.random.Generator,
    cfg: AugmentConfig,
) -> tuple[PatchSet, int]:
    """Run the augmentation stack, keeping the PatchSet and its provenance."""
    rot_choices = cfg.class_space().rot_indices()
    rot_index = rot_choices[int(rng.integers(0, len(rot_choices)))]
    if rot_index:
        planes = tuple(np.rot90(p, k=rot_index) for p in image_planes)
    else:
        planes = image_planes

    # Cells are freshly materialized here, so skip assemble_set's defensive copy.
    pool = _extract_config_cells(planes, catalog, config)
    ps = PatchSet(
        image_id=0,
        config_id=config.config_id,
        patches=[pool[cell] for cell in config.cells],
        rot_index=rot_index,
    )

    if cfg.enable_ubt:
        ps = apply_mirror(ps, catalog, rng)
        ps = apply_ubt_zoom_crop(ps, rng, cfg)
    elif cfg.enable_yj:
        ps = yoked_crop(ps, rng)
    else:
        ps = random_crop(ps, rng)

    if cfg.enable_cd:
        ps = apply_channel_drop(ps, rng, cfg)
    if cfg.enable_ra:
        ps = apply_aperture(ps, rng, cfg)
    if cfg.enable_cb:
        ps = replace(ps, flags=ps.flags | FLAG_CHROMA_BLUR)

    return ps, labels.encode(ps.config_id, rot_index, cfg.class_space())


def make_sample(
    image_planes: tuple[np.ndarray, np.ndarray, np.ndarray],
    config: PatchConfiguration,
    catalog: ConfigCatalog,
    rng: np.random.Generator,
    cfg: AugmentConfig,
) -> SampleRecord:
    """Run the full augmentation stack for one (image, configuration) pair.

    `image_planes` are the three square source planes (chroma-blurred
    upstream when that tool is on). All randomness comes from `rng`; feeding
    the stream from `sample_rng` keyed by (seed, image_id, config_id, epoch)
    makes the record a pure function of that key.
    """
    ps, class_id = make_patch_set(image_planes, config, catalog, rng, cfg)
    return SampleRecord(
        class_id=class_id,
        rot_index=ps.rot_index,
        config_id=ps.config_id,
        flags=ps.flags,
        patches=ps.patches,
    )
