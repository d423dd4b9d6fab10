"""Reader for the patch-set shard format, written against its documented schema.

This package deliberately re-implements the wire format instead of importing
the generator: the byte layout is the contract. Shards are little-endian:

    header (16 bytes): magic "PSSS" | format_version u32 | record_count u32
                       | class_count u16 | reserved u16
    record (82952 bytes):
        class_id u16 | rot_index u8 | config_id u8 | flags u8 | 3 zero bytes
        | P1 | P2 | P3  (each 96*96*3 bytes, row-major interleaved RGB)

The manifest is JSON ("patch-manifest/1") listing shard files with record
counts and sha256 content hashes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ShardError",
    "Record",
    "load_manifest",
    "iter_records",
    "load_split",
    "encode_record",
]

MAGIC = b"PSSS"
FORMAT_VERSION = 1
MANIFEST_FORMAT = "patch-manifest/1"
PATCH_SHAPE = (96, 96, 3)
PATCH_BYTES = 96 * 96 * 3
RECORD_BYTES = 8 + 3 * PATCH_BYTES

_HEADER = struct.Struct("<4sIIHH")
_RECORD_HEAD = struct.Struct("<HBBB3x")


class ShardError(ValueError):
    """Framing, hashing, or labeling fault in a shard or its manifest."""


@dataclass
class Record:
    class_id: int
    rot_index: int
    config_id: int
    flags: int
    patches: np.ndarray  # (3, 96, 96, 3) uint8


def load_manifest(path) -> dict:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format") != MANIFEST_FORMAT:
        raise ShardError(f"unsupported manifest format {doc.get('format')!r}")
    if not doc.get("shards"):
        raise ShardError("manifest lists no shards: nothing to train on")
    doc["_base"] = str(path.parent)
    return doc


def _decode(buf: bytes) -> Record:
    class_id, rot_index, config_id, flags = _RECORD_HEAD.unpack_from(buf)
    patches = (
        np.frombuffer(buf, dtype=np.uint8, count=3 * PATCH_BYTES, offset=8)
        .reshape(3, *PATCH_SHAPE)
        .copy()
    )
    return Record(class_id, rot_index, config_id, flags, patches)


def encode_record(rec: Record) -> bytes:
    head = _RECORD_HEAD.pack(rec.class_id, rec.rot_index, rec.config_id, rec.flags)
    return head + np.ascontiguousarray(rec.patches).tobytes()


def _read_shard(path, expected_records: int, expected_sha: str | None, class_count: int):
    data = Path(path).read_bytes()
    if expected_sha is not None:
        digest = hashlib.sha256(data).hexdigest()
        if digest != expected_sha:
            raise ShardError(f"{path}: content hash mismatch")
    if len(data) < _HEADER.size:
        raise ShardError(f"{path}: truncated header")
    magic, version, count, classes, _ = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ShardError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ShardError(f"{path}: unsupported version {version}")
    if count != expected_records:
        raise ShardError(f"{path}: header count {count} != manifest count {expected_records}")
    if classes != class_count:
        raise ShardError(f"{path}: class count {classes} != manifest {class_count}")
    body = data[_HEADER.size :]
    if len(body) != count * RECORD_BYTES:
        raise ShardError(f"{path}: bad framing ({len(body)} body bytes for {count} records)")
    for i in range(count):
        rec = _decode(body[i * RECORD_BYTES : (i + 1) * RECORD_BYTES])
        if rec.class_id >= class_count:
            raise ShardError(f"{path}[{i}]: class_id {rec.class_id} out of range")
        yield rec


def iter_records(manifest: dict, section: str = "shards"):
    """Yield records in shard order (the epoch order is the shard order)."""
    class_count = manifest["class_space"]["num_classes"]
    base = Path(manifest["_base"])
    for entry in manifest.get(section, []):
        yield from _read_shard(
            base / entry["file"], entry["records"], entry.get("sha256"), class_count
        )


def load_split(manifest: dict):
    """Train/eval arrays: holdout shards when present, else the last shard.

    Returns (train_patches, train_labels, eval_patches, eval_labels) with
    patches as (N, 3, 96, 96, 3) uint8 and labels as int64.
    """

    def stack(records):
        records = list(records)
        if not records:
            return np.zeros((0, 3, *PATCH_SHAPE), dtype=np.uint8), np.zeros(0, dtype=np.int64)
        patches = np.stack([r.patches for r in records])
        labels = np.array([r.class_id for r in records], dtype=np.int64)
        return patches, labels

    if manifest.get("holdout_shards"):
        train = stack(iter_records(manifest, "shards"))
        evalu = stack(iter_records(manifest, "holdout_shards"))
        return (*train, *evalu)

    entries = manifest["shards"]
    if len(entries) < 2:
        raise ShardError(
            "need holdout shards or at least two train shards to form an eval split"
        )
    head = dict(manifest)
    head["shards"] = entries[:-1]
    tail = dict(manifest)
    tail["shards"] = entries[-1:]
    train = stack(iter_records(head, "shards"))
    evalu = stack(iter_records(tail, "shards"))
    return (*train, *evalu)
