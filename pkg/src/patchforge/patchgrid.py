"""Source grids, the 20-configuration catalog, and patch cropping.

Three square source grids supply a pool of 20 overlapping 110x110 patches per
image. A configuration names an ordered triple of grid cells (P1, P2, P3);
the catalog holds all 20 configurations plus the horizontal-mirror partner of
each. Geometry lives in data (JSON) so an alternative catalog replaces a
file, not code; `default_catalog` is the shipped instance of that format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "PATCH_SIDE",
    "CROP_SIDE",
    "JITTER_MAX",
    "GridSpec",
    "PatchConfiguration",
    "ConfigCatalog",
    "PatchSet",
    "CatalogError",
    "default_catalog",
    "load_catalog",
    "save_catalog",
    "extract_source_patches",
    "assemble_set",
    "yoked_crop",
    "random_crop",
]

PATCH_SIDE = 110
CROP_SIDE = 96
JITTER_MAX = PATCH_SIDE - CROP_SIDE  # inclusive upper bound of a crop offset

CATALOG_FORMAT = "patch-catalog/1"

FAMILIES = ("threebythree", "twobytwo", "hybrid")

# Augmentation bitset, recorded per sample.
FLAG_MIRROR = 0x01
FLAG_UBT = 0x02
FLAG_RRM = 0x04
FLAG_APERTURE = 0x08
FLAG_YOKED_JITTER = 0x10
FLAG_RANDOM_JITTER = 0x20
FLAG_CHANNEL_DROP = 0x40
FLAG_CHROMA_BLUR = 0x80


class CatalogError(ValueError):
    """Raised when a catalog file fails parsing or its invariants."""


@dataclass(frozen=True)
class GridSpec:
    """One source grid: a square image side and top-left patch offsets."""

    name: str
    image_side: int
    patch_side: int
    offsets: tuple[tuple[int, int], ...]

    def validate(self) -> None:
        if len(set(self.offsets)) != len(self.offsets):
            raise CatalogError(f"grid {self.name}: duplicate offsets")
        for x, y in self.offsets:
            if x < 0 or y < 0 or x + self.patch_side > self.image_side or y + self.patch_side > self.image_side:
                raise CatalogError(
                    f"grid {self.name}: cell offset ({x},{y}) out of bounds "
                    f"({max(x, y)}+{self.patch_side} > {self.image_side})"
                )


@dataclass(frozen=True)
class PatchConfiguration:
    """An ordered (P1, P2, P3) triple of (grid name, cell index) pairs."""

    config_id: int
    cells: tuple[tuple[str, int], ...]
    family: str
    mirror_id: int

    def validate(self) -> None:
        if len(self.cells) != 3 or len(set(self.cells)) != 3:
            raise CatalogError(f"config {self.config_id}: needs 3 distinct cells, got {self.cells}")
        if self.family not in FAMILIES:
            raise CatalogError(f"config {self.config_id}: unknown family {self.family!r}")
        if self.family == "hybrid" and len({g for g, _ in self.cells}) < 2:
            raise CatalogError(f"config {self.config_id}: hybrid must reference two grids")


@dataclass(frozen=True)
class ConfigCatalog:
    configs: tuple[PatchConfiguration, ...]
    grids: dict[str, GridSpec]

    def __len__(self) -> int:
        return len(self.configs)

    def mirror_of(self, config_id: int) -> int:
        return self.configs[config_id].mirror_id

    def validate(self) -> None:
        if len(self.configs) != 20:
            raise CatalogError(f"expected 20 configurations, got {len(self.configs)}")
        ids = [c.config_id for c in self.configs]
        if ids != list(range(20)):
            raise CatalogError(f"config ids must be 0..19 without gaps, got {sorted(ids)}")
        for grid in self.grids.values():
            grid.validate()
        for cfg in self.configs:
            cfg.validate()
            for grid_name, cell in cfg.cells:
                if grid_name not in self.grids:
                    raise CatalogError(f"config {cfg.config_id}: unknown grid {grid_name!r}")
                if not 0 <= cell < len(self.grids[grid_name].offsets):
                    raise CatalogError(
                        f"config {cfg.config_id}: cell {cell} not in grid {grid_name!r}"
                    )
            partner = cfg.mirror_id
            if not 0 <= partner < len(self.configs):
                raise CatalogError(f"config {cfg.config_id}: mirror id {partner} out of range")
            if self.configs[partner].mirror_id != cfg.config_id:
                raise CatalogError(
                    f"mirror map is not an involution: {cfg.config_id} -> {partner} "
                    f"-> {self.configs[partner].mirror_id}"
                )
            if self.configs[partner].family != cfg.family:
                raise CatalogError(
                    f"mirror partner of config {cfg.config_id} crosses families"
                )


@dataclass
class PatchSet:
    """Three patches plus provenance, flowing through the augmentation stack."""

    image_id: int
    config_id: int
    patches: list[np.ndarray]
    rot_index: int = 0
    flags: int = 0
    crop_offsets: list[tuple[int, int]] | None = None
    zoom: tuple[int, int, int] | None = None  # (target side, dx, dy)
    resample_methods: list[str] | None = None
    aperture: object | None = None
    mirrored: bool = False

    def __post_init__(self):
        if len(self.patches) != 3:
            raise ValueError("a patch set holds exactly 3 patches")
        sides = {p.shape[:2] for p in self.patches}
        if len(sides) != 1:
            raise ValueError(f"patch sizes must be uniform within a set, got {sides}")

    @property
    def patch_side(self) -> int:
        return self.patches[0].shape[0]


def _grid3x3() -> GridSpec:
    # (384 - 110) / 2 = 137: corner-aligned, evenly spaced, no edge margin.
    steps = (0, 137, 274)
    offsets = tuple((x, y) for y in steps for x in steps)
    return GridSpec("grid3x3", 384, PATCH_SIDE, offsets)


def _grid2x2() -> GridSpec:
    steps = (0, 146)
    offsets = tuple((x, y) for y in steps for x in steps)
    return GridSpec("grid2x2", 256, PATCH_SIDE, offsets)


def _grid_overlap() -> GridSpec:
    # Seven overlapping cells in a 196x196 image: corners, center, mid-left,
    # mid-right; together with 9 + 4 cells above this makes a 20-patch pool.
    offsets = ((0, 0), (86, 0), (0, 86), (86, 86), (43, 43), (0, 43), (86, 43))
    return GridSpec("overlap", 196, PATCH_SIDE, offsets)


# grid3x3 cell indices, row-major: 0 1 2 / 3 4 5 / 6 7 8.
_G3 = "grid3x3"
_G2 = "grid2x2"
_OV = "overlap"


def default_catalog() -> ConfigCatalog:
    """The built-in 20-configuration catalog.

    Eight center-through lines on the 3x3 grid (each line in both endpoint
    orders), four L-shapes on the 2x2 grid (clockwise from top-left, one
    corner omitted each), and eight hybrids mixing overlap-grid cells with
    3x3 cells. Mirror partners swap left/right cells; symmetric
    configurations are their own partner.
    """
    c = []

    def cfg(cid, family, cells, mirror):
        c.append(PatchConfiguration(cid, tuple(cells), family, mirror))

    # 3x3 lines through the center: N-C-S, S-C-N, W-C-E, E-C-W,
    # NW-C-SE, SE-C-NW, NE-C-SW, SW-C-NE.
    cfg(0, "threebythree", [(_G3, 1), (_G3, 4), (_G3, 7)], 0)
    cfg(1, "threebythree", [(_G3, 7), (_G3, 4), (_G3, 1)], 1)
    cfg(2, "threebythree", [(_G3, 3), (_G3, 4), (_G3, 5)], 3)
    cfg(3, "threebythree", [(_G3, 5), (_G3, 4), (_G3, 3)], 2)
    cfg(4, "threebythree", [(_G3, 0), (_G3, 4), (_G3, 8)], 6)
    cfg(5, "threebythree", [(_G3, 8), (_G3, 4), (_G3, 0)], 7)
    cfg(6, "threebythree", [(_G3, 2), (_G3, 4), (_G3, 6)], 4)
    cfg(7, "threebythree", [(_G3, 6), (_G3, 4), (_G3, 2)], 5)
    # 2x2 L-shapes; cells 0 1 / 2 3, clockwise order starting at top-left.
    cfg(8, "twobytwo", [(_G2, 0), (_G2, 1), (_G2, 2)], 9)   # omits bottom-right
    cfg(9, "twobytwo", [(_G2, 0), (_G2, 1), (_G2, 3)], 8)   # omits bottom-left
    cfg(10, "twobytwo", [(_G2, 0), (_G2, 3), (_G2, 2)], 11)  # omits top-right
    cfg(11, "twobytwo", [(_G2, 1), (_G2, 3), (_G2, 2)], 10)  # omits top-left
    # Hybrids: one overlap cell plus two 3x3 cells (two image scales).
    cfg(12, "hybrid", [(_OV, 5), (_G3, 4), (_G3, 5)], 13)   # mid-left, C, E
    cfg(13, "hybrid", [(_OV, 6), (_G3, 4), (_G3, 3)], 12)   # mid-right, C, W
    cfg(14, "hybrid", [(_OV, 0), (_G3, 4), (_G3, 8)], 15)   # top-left, C, SE
    cfg(15, "hybrid", [(_OV, 1), (_G3, 4), (_G3, 6)], 14)   # top-right, C, SW
    cfg(16, "hybrid", [(_OV, 2), (_G3, 4), (_G3, 2)], 17)   # bottom-left, C, NE
    cfg(17, "hybrid", [(_OV, 3), (_G3, 4), (_G3, 0)], 16)   # bottom-right, C, NW
    cfg(18, "hybrid", [(_OV, 4), (_G3, 3), (_G3, 5)], 18)   # center, W, E
    cfg(19, "hybrid", [(_OV, 4), (_G3, 1), (_G3, 7)], 19)   # center, N, S

    grids = {g.name: g for g in (_grid3x3(), _grid2x2(), _grid_overlap())}
    catalog = ConfigCatalog(configs=tuple(c), grids=grids)
    catalog.validate()
    return catalog


def save_catalog(catalog: ConfigCatalog, path) -> None:
    doc = {
        "format": CATALOG_FORMAT,
        "grids": [
            {
                "name": g.name,
                "image_side": g.image_side,
                "patch_side": g.patch_side,
                "offsets": [list(o) for o in g.offsets],
            }
            for g in catalog.grids.values()
        ],
        "configs": [
            {
                "id": c.config_id,
                "family": c.family,
                "cells": [[g, i] for g, i in c.cells],
                "mirror": c.mirror_id,
            }
            for c in catalog.configs
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_catalog(path) -> ConfigCatalog:
    """Load and validate a catalog file, reporting the offending entry."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    if doc.get("format") != CATALOG_FORMAT:
        raise CatalogError(f"unsupported catalog format tag {doc.get('format')!r}")
    try:
        grids = {
            g["name"]: GridSpec(
                name=g["name"],
                image_side=int(g["image_side"]),
                patch_side=int(g["patch_side"]),
                offsets=tuple((int(x), int(y)) for x, y in g["offsets"]),
            )
            for g in doc["grids"]
        }
        configs = tuple(
            PatchConfiguration(
                config_id=int(c["id"]),
                cells=tuple((str(g), int(i)) for g, i in c["cells"]),
                family=str(c["family"]),
                mirror_id=int(c["mirror"]),
            )
            for c in sorted(doc["configs"], key=lambda c: int(c["id"]))
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CatalogError(f"malformed catalog {path}: {exc}") from exc
    catalog = ConfigCatalog(configs=configs, grids=grids)
    catalog.validate()
    return catalog


def extract_source_patches(
    img384: np.ndarray, img256: np.ndarray, img196: np.ndarray, catalog: ConfigCatalog
) -> dict[tuple[str, int], np.ndarray]:
    """Copy every catalog cell out of the three source planes.

    Planes are matched to grids by their side length, so the three arguments
    must be square and exactly the catalog's grid sizes.
    """
    planes = {}
    for img in (img384, img256, img196):
        if img.shape[0] != img.shape[1]:
            raise ValueError(f"source planes must be square, got {img.shape[:2]}")
        planes[img.shape[0]] = img
    pool: dict[tuple[str, int], np.ndarray] = {}
    for grid in catalog.grids.values():
        plane = planes.get(grid.image_side)
        if plane is None:
            raise ValueError(
                f"no source plane of side {grid.image_side} for grid {grid.name!r}"
            )
        for cell, (x, y) in enumerate(grid.offsets):
            pool[(grid.name, cell)] = np.ascontiguousarray(
                plane[y : y + grid.patch_side, x : x + grid.patch_side]
            )
    return pool


def assemble_set(
    patch_pool: dict[tuple[str, int], np.ndarray],
    config: PatchConfiguration,
    image_id: int,
) -> PatchSet:
    """Order the configuration's three patches into a fresh PatchSet."""
    patches = []
    for cell in config.cells:
        if cell not in patch_pool:
            raise KeyError(f"patch pool is missing cell {cell}")
        patches.append(patch_pool[cell].copy())
    return PatchSet(image_id=image_id, config_id=config.config_id, patches=patches)


def _require_side(ps: PatchSet, side: int, op: str) -> None:
    if ps.patch_side != side:
        raise ValueError(f"{op} expects {side}x{side} patches, got {ps.patch_side}")


def yoked_crop(ps: PatchSet, rng: np.random.Generator) -> PatchSet:
    """Crop all three patches to 96x96 with one shared random offset."""
    _require_side(ps, PATCH_SIDE, "yoked_crop")
    dx = int(rng.integers(0, JITTER_MAX + 1))
    dy = int(rng.integers(0, JITTER_MAX + 1))
    patches = [p[dy : dy + CROP_SIDE, dx : dx + CROP_SIDE].copy() for p in ps.patches]
    return replace(
        ps,
        patches=patches,
        flags=ps.flags | FLAG_YOKED_JITTER,
        crop_offsets=[(dx, dy)] * 3,
    )


def random_crop(ps: PatchSet, rng: np.random.Generator) -> PatchSet:
    """Unyoked baseline: an independent crop offset per patch (P1, P2, P3)."""
    _require_side(ps, PATCH_SIDE, "random_crop")
    offsets = []
    patches = []
    for p in ps.patches:
        dx = int(rng.integers(0, JITTER_MAX + 1))
        dy = int(rng.integers(0, JITTER_MAX + 1))
        offsets.append((dx, dy))
        patches.append(p[dy : dy + CROP_SIDE, dx : dx + CROP_SIDE].copy())
    return replace(
        ps,
        patches=patches,
        flags=ps.flags | FLAG_RANDOM_JITTER,
        crop_offsets=offsets,
    )
