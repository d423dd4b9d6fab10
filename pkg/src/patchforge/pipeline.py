"""Corpus ingestion, offline preprocessing, shard generation material.

`generate` turns a directory of images into shards of fixed-size sample
records plus a manifest. Every output byte is a pure function of (seed,
catalog, config, corpus): per-sample random streams are keyed by
(seed, image id, configuration id, epoch) and the record order per epoch
comes from a seeded permutation, so any worker count produces identical
files. The manifest is written last and atomically; a partially generated
output directory never carries one.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import AugmentConfig, make_sample, sample_rng, shuffle_rng
from .imgproc import ResampleMethod, aspect_resize_center_crop, chroma_blur
from .patchgrid import ConfigCatalog, default_catalog, load_catalog
from .records import (
    FORMAT_VERSION,
    RECORD_BYTES,
    decode_record,
    read_shard_header,
    write_shard,
)
from . import labels

__all__ = [
    "PipelineConfig",
    "CorpusListing",
    "VerifyReport",
    "ingest",
    "load_image",
    "preprocess_image",
    "generate",
    "verify",
    "stats",
    "expected_counts",
]

MANIFEST_FORMAT = "patch-manifest/1"
MANIFEST_NAME = "manifest.json"
PLANE_SIDES = (384, 256, 196)

_IMAGE_CACHE_CAP = 32


@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str
    output_dir: str
    seed: int
    catalog_path: str | None = None
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    epochs: int = 1
    shard_records: int = 65536
    workers: int = 1
    holdout_fraction: float = 0.0

    def __post_init__(self):
        if self.shard_records < 1:
            raise ValueError("shard_records must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must be in [0, 1)")

    def load_catalog(self) -> ConfigCatalog:
        if self.catalog_path:
            return load_catalog(self.catalog_path)
        return default_catalog()


@dataclass(frozen=True)
class CorpusListing:
    """Deterministic (lexicographic) corpus ordering plus the skip census."""

    root: str
    entries: tuple[str, ...]
    skipped: tuple[str, ...]

    def path(self, image_id: int) -> Path:
        return Path(self.root) / self.entries[image_id]


def ingest(input_dir) -> CorpusListing:
    """List decodable images under a directory in lexicographic path order."""
    root = Path(input_dir)
    if not root.is_dir():
        raise ValueError(f"input directory {input_dir} does not exist")
    candidates = sorted(
        p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file()
    )
    entries, skipped = [], []
    for rel in candidates:
        try:
            with Image.open(root / rel) as im:
                im.load()
            entries.append(rel)
        except (UnidentifiedImageError, OSError, ValueError):
            skipped.append(rel)
    if not entries:
        raise ValueError(f"no decodable images under {input_dir}")
    return CorpusListing(root=str(root), entries=tuple(entries), skipped=tuple(skipped))


def load_image(path) -> np.ndarray:
    """Decode to (H, W, 3) uint8; grayscale is promoted by replication."""
    with Image.open(path) as im:
        if im.mode in ("1", "L", "I", "I;16", "F"):
            gray = np.asarray(im.convert("L"), dtype=np.uint8)
            return np.repeat(gray[..., None], 3, axis=2)
        if im.mode != "RGB":
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8).copy()


def preprocess_image(img: np.ndarray, aug: AugmentConfig) -> tuple[np.ndarray, ...]:
    """Build the three square source planes, each from the original image.

    Aspect-preserving reduction to 384/256/196 with the area kernel; when
    chroma blurring is on it runs here, offline, on each full plane before
    any patch extraction.
    """
    planes = tuple(
        aspect_resize_center_crop(img, side, ResampleMethod.AREA) for side in PLANE_SIDES
    )
    if aug.enable_cb:
        planes = tuple(chroma_blur(p, aug.blur_window) for p in planes)
    return planes


def expected_counts(image_count: int, catalog_size: int, epochs: int) -> dict:
    """Dry-run arithmetic for `stats`: record and byte totals."""
    records = image_count * catalog_size * epochs
    return {
        "image_count": image_count,
        "catalog_size": catalog_size,
        "epochs": epochs,
        "records": records,
        "record_bytes": RECORD_BYTES,
        "total_bytes": records * RECORD_BYTES,
    }


def stats(config: PipelineConfig) -> dict:
    listing = ingest(config.input_dir)
    catalog = config.load_catalog()
    out = expected_counts(len(listing.entries), len(catalog), config.epochs)
    out["skipped"] = len(listing.skipped)
    return out


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


class _PlaneCache:
    """Small per-process LRU of preprocessed image planes."""

    def __init__(self, listing: CorpusListing, aug: AugmentConfig, cap: int = _IMAGE_CACHE_CAP):
        self.listing = listing
        self.aug = aug
        self.cap = cap
        self.planes: OrderedDict[int, tuple] = OrderedDict()

    def get(self, image_id: int) -> tuple:
        if image_id in self.planes:
            self.planes.move_to_end(image_id)
            return self.planes[image_id]
        img = load_image(self.listing.path(image_id))
        planes = preprocess_image(img, self.aug)
        self.planes[image_id] = planes
        if len(self.planes) > self.cap:
            self.planes.popitem(last=False)
        return planes


@dataclass
class _ShardTask:
    file_name: str
    keys: list[tuple[int, int, int]]  # (epoch, image_id, config_id)


@dataclass
class _ShardResult:
    file_name: str
    records: int
    sha256: str
    skipped_images: list[str]


_WORKER_CTX: dict = {}


def _init_worker(listing, catalog, aug, seed, class_count, output_dir):
    _WORKER_CTX.update(
        listing=listing,
        catalog=catalog,
        aug=aug,
        seed=seed,
        class_count=class_count,
        output_dir=output_dir,
        cache=_PlaneCache(listing, aug),
    )


def _build_shard(task: _ShardTask) -> _ShardResult:
    ctx = _WORKER_CTX
    return _build_shard_with(
        task,
        ctx["listing"],
        ctx["catalog"],
        ctx["aug"],
        ctx["seed"],
        ctx["class_count"],
        ctx["output_dir"],
        ctx["cache"],
    )


def _build_shard_with(task, listing, catalog, aug, seed, class_count, output_dir, cache):
    records = []
    skipped: list[str] = []
    for epoch, image_id, config_id in task.keys:
        try:
            planes = cache.get(image_id)
        except (UnidentifiedImageError, OSError, ValueError):
            rel = listing.entries[image_id]
            if rel not in skipped:
                skipped.append(rel)
            continue
        rng = sample_rng(seed, image_id, config_id, epoch)
        records.append(make_sample(planes, catalog.configs[config_id], catalog, rng, aug))
    tmp = Path(output_dir) / (task.file_name + ".tmp")
    final = Path(output_dir) / task.file_name
    write_shard(tmp, records, class_count)
    os.replace(tmp, final)
    digest = hashlib.sha256(final.read_bytes()).hexdigest()
    return _ShardResult(task.file_name, len(records), digest, skipped)


def _epoch_order(image_ids, catalog_size, seed, epochs, split) -> list[tuple[int, int, int]]:
    keys: list[tuple[int, int, int]] = []
    pairs = [(img, cfg) for img in image_ids for cfg in range(catalog_size)]
    for epoch in range(epochs):
        perm = shuffle_rng(seed, epoch, split).permutation(len(pairs))
        keys.extend((epoch, *pairs[i]) for i in perm)
    return keys


def _slice_tasks(keys, shard_records, prefix) -> list[_ShardTask]:
    tasks = []
    for start in range(0, len(keys), shard_records):
        index = start // shard_records
        tasks.append(_ShardTask(f"{prefix}-{index:05d}.shard", keys[start : start + shard_records]))
    return tasks


def config_fingerprint(config: PipelineConfig, catalog: ConfigCatalog) -> str:
    """Hash of the semantic configuration; paths, workers and timestamps are
    excluded so reruns and different worker counts fingerprint identically."""
    doc = {
        "seed": config.seed,
        "epochs": config.epochs,
        "shard_records": config.shard_records,
        "holdout_fraction": config.holdout_fraction,
        "augment": config.augment.to_dict(),
        "catalog": _catalog_doc(catalog),
        "record_format": FORMAT_VERSION,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _catalog_doc(catalog: ConfigCatalog) -> dict:
    return {
        "grids": [
            {
                "name": g.name,
                "image_side": g.image_side,
                "patch_side": g.patch_side,
                "offsets": [list(o) for o in g.offsets],
            }
            for g in sorted(catalog.grids.values(), key=lambda g: g.name)
        ],
        "configs": [
            {
                "id": c.config_id,
                "family": c.family,
                "cells": [list(cell) for cell in c.cells],
                "mirror": c.mirror_id,
            }
            for c in catalog.configs
        ],
    }


def generate(config: PipelineConfig) -> Path:
    """Materialize all epochs as shards plus a manifest; returns its path."""
    catalog = config.load_catalog()
    listing = ingest(config.input_dir)
    space = config.augment.class_space()

    n = len(listing.entries)
    holdout_count = int(n * config.holdout_fraction)
    train_ids = list(range(n - holdout_count))
    holdout_ids = list(range(n - holdout_count, n))

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_tasks = _slice_tasks(
        _epoch_order(train_ids, len(catalog), config.seed, config.epochs, split=0),
        config.shard_records,
        "shard",
    )
    holdout_tasks = _slice_tasks(
        _epoch_order(holdout_ids, len(catalog), config.seed, config.epochs, split=1),
        config.shard_records,
        "holdout",
    )
    tasks = train_tasks + holdout_tasks

    created = [out_dir / t.file_name for t in tasks]
    try:
        init_args = (listing, catalog, config.augment, config.seed, space.num_classes, str(out_dir))
        if config.workers > 1 and len(tasks) > 1:
            ctx = multiprocessing.get_context("spawn")
            with ctx.Pool(config.workers, initializer=_init_worker, initargs=init_args) as pool:
                results = pool.map(_build_shard, tasks)
        else:
            cache = _PlaneCache(listing, config.augment)
            results = [_build_shard_with(t, *init_args[:5], str(out_dir), cache) for t in tasks]

        skipped_images = sorted({rel for r in results for rel in r.skipped_images})
        train_results = results[: len(train_tasks)]
        holdout_results = results[len(train_tasks) :]
        manifest = {
            "format": MANIFEST_FORMAT,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "seed": config.seed,
            "config_fingerprint": config_fingerprint(config, catalog),
            "input_dir": str(config.input_dir),
            "class_space": {
                "num_configs": space.num_configs,
                "num_rots": space.num_rots,
                "num_classes": space.num_classes,
            },
            "epochs": config.epochs,
            "shard_records": config.shard_records,
            "image_count": len(train_ids),
            "holdout_image_count": len(holdout_ids),
            "records_total": sum(r.records for r in train_results),
            "holdout_records_total": sum(r.records for r in holdout_results),
            "skipped_ingest": len(listing.skipped),
            "skipped_images": skipped_images,
            "shards": [
                {"file": r.file_name, "records": r.records, "sha256": r.sha256}
                for r in train_results
            ],
            "holdout_shards": [
                {"file": r.file_name, "records": r.records, "sha256": r.sha256}
                for r in holdout_results
            ],
        }
        manifest_path = out_dir / MANIFEST_NAME
        tmp = out_dir / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, manifest_path)
        return manifest_path
    except Exception:
        for path in created:
            path.unlink(missing_ok=True)
        for stray in out_dir.glob("*.tmp"):
            stray.unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass
class VerifyReport:
    ok: bool
    problems: list[str]
    records_checked: int


def verify(manifest_path) -> VerifyReport:
    """Re-hash shards and validate framing and every label, itemizing faults."""
    manifest_path = Path(manifest_path)
    problems: list[str] = []
    checked = 0
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        return VerifyReport(False, [f"cannot read manifest: {exc}"], 0)
    if manifest.get("format") != MANIFEST_FORMAT:
        return VerifyReport(False, [f"unknown manifest format {manifest.get('format')!r}"], 0)

    cs = manifest["class_space"]
    space = labels.ClassSpace(num_configs=cs["num_configs"], num_rots=cs["num_rots"])
    base = manifest_path.parent

    for section in ("shards", "holdout_shards"):
        for entry in manifest.get(section, []):
            path = base / entry["file"]
            if not path.is_file():
                problems.append(f"{entry['file']}: missing file")
                continue
            data = path.read_bytes()
            digest = hashlib.sha256(data).hexdigest()
            if digest != entry["sha256"]:
                problems.append(f"{entry['file']}: content hash mismatch")
                continue
            try:
                header = read_shard_header(path)
            except ValueError as exc:
                problems.append(f"{entry['file']}: {exc}")
                continue
            if header.record_count != entry["records"]:
                problems.append(
                    f"{entry['file']}: header says {header.record_count} records, "
                    f"manifest says {entry['records']}"
                )
            if header.class_count != space.num_classes:
                problems.append(
                    f"{entry['file']}: class count {header.class_count} != {space.num_classes}"
                )
            body = data[16:]
            if len(body) != header.record_count * RECORD_BYTES:
                problems.append(f"{entry['file']}: bad framing ({len(body)} body bytes)")
                continue
            for i in range(header.record_count):
                rec = decode_record(body[i * RECORD_BYTES : (i + 1) * RECORD_BYTES])
                checked += 1
                if rec.class_id >= space.num_classes:
                    problems.append(
                        f"{entry['file']}[{i}]: class_id {rec.class_id} out of range "
                        f"0..{space.num_classes - 1}"
                    )
                    continue
                config_id, rot_index = labels.decode(rec.class_id, space)
                if (config_id, rot_index) != (rec.config_id, rec.rot_index):
                    problems.append(
                        f"{entry['file']}[{i}]: class_id {rec.class_id} decodes to "
                        f"(config {config_id}, rot {rot_index}) but record says "
                        f"(config {rec.config_id}, rot {rec.rot_index})"
                    )

    total = sum(e["records"] for e in manifest.get("shards", []))
    if total != manifest.get("records_total"):
        problems.append(
            f"records_total {manifest.get('records_total')} != shard sum {total}"
        )
    return VerifyReport(ok=not problems, problems=problems, records_checked=checked)
