"""Fixed-size sample records and the shard file framing.

Shard layout, little-endian throughout:

    header (16 bytes): magic "PSSS" | format_version u32 | record_count u32
                       | class_count u16 | reserved u16
    records (82952 bytes each):
        class_id u16 | rot_index u8 | config_id u8 | flags u8 | 3 zero bytes
        | P1 | P2 | P3   (each 96*96*3 bytes, row-major interleaved RGB)

Records are fixed size so any index is O(1) seekable; there is no
compression.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SHARD_MAGIC",
    "FORMAT_VERSION",
    "RECORD_BYTES",
    "SampleRecord",
    "ShardHeader",
    "encode_record",
    "decode_record",
    "write_shard",
    "read_shard",
    "read_shard_header",
    "write_ppm",
]

SHARD_MAGIC = b"PSSS"
FORMAT_VERSION = 1
PATCH_SHAPE = (96, 96, 3)
PATCH_BYTES = 96 * 96 * 3
RECORD_BYTES = 8 + 3 * PATCH_BYTES

_HEADER = struct.Struct("<4sIIHH")
_RECORD_HEAD = struct.Struct("<HBBB3x")

assert _HEADER.size == 16
assert _RECORD_HEAD.size == 8


class ShardFormatError(ValueError):
    """Raised when shard bytes do not match the documented framing."""


@dataclass
class SampleRecord:
    """One emitted training sample: a labeled, augmented three-patch set."""

    class_id: int
    rot_index: int
    config_id: int
    flags: int
    patches: list[np.ndarray]

    def __post_init__(self):
        if len(self.patches) != 3:
            raise ValueError("a sample record holds exactly 3 patches")
        for p in self.patches:
            if p.shape != PATCH_SHAPE or p.dtype != np.uint8:
                raise ValueError(f"patches must be uint8 {PATCH_SHAPE}, got {p.shape} {p.dtype}")


@dataclass(frozen=True)
class ShardHeader:
    format_version: int
    record_count: int
    class_count: int


def encode_record(rec: SampleRecord) -> bytes:
    head = _RECORD_HEAD.pack(rec.class_id, rec.rot_index, rec.config_id, rec.flags)
    return head + b"".join(np.ascontiguousarray(p).tobytes() for p in rec.patches)


def decode_record(buf: bytes) -> SampleRecord:
    if len(buf) != RECORD_BYTES:
        raise ShardFormatError(f"record must be {RECORD_BYTES} bytes, got {len(buf)}")
    class_id, rot_index, config_id, flags = _RECORD_HEAD.unpack_from(buf)
    patches = []
    for i in range(3):
        start = 8 + i * PATCH_BYTES
        raw = np.frombuffer(buf, dtype=np.uint8, count=PATCH_BYTES, offset=start)
        patches.append(raw.reshape(PATCH_SHAPE).copy())
    return SampleRecord(class_id, rot_index, config_id, flags, patches)


def write_shard(path, records, class_count: int) -> int:
    """Write records to a shard file; returns the byte size written."""
    records = list(records)
    payload = _HEADER.pack(SHARD_MAGIC, FORMAT_VERSION, len(records), class_count, 0)
    blob = bytearray(payload)
    for rec in records:
        blob += encode_record(rec)
    Path(path).write_bytes(bytes(blob))
    return len(blob)


def read_shard_header(path) -> ShardHeader:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise ShardFormatError(f"{path}: truncated header")
    magic, version, count, classes, _ = _HEADER.unpack(head)
    if magic != SHARD_MAGIC:
        raise ShardFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ShardFormatError(f"{path}: unsupported format version {version}")
    return ShardHeader(version, count, classes)


def read_shard(path) -> tuple[ShardHeader, list[SampleRecord]]:
    data = Path(path).read_bytes()
    header = read_shard_header(path)
    body = data[_HEADER.size :]
    expected = header.record_count * RECORD_BYTES
    if len(body) != expected:
        raise ShardFormatError(
            f"{path}: body is {len(body)} bytes, header promises {expected}"
        )
    records = [
        decode_record(body[i * RECORD_BYTES : (i + 1) * RECORD_BYTES])
        for i in range(header.record_count)
    ]
    return header, records


def read_record_at(path, index: int) -> SampleRecord:
    header = read_shard_header(path)
    if not 0 <= index < header.record_count:
        raise IndexError(f"record {index} out of range 0..{header.record_count - 1}")
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size + index * RECORD_BYTES)
        buf = fh.read(RECORD_BYTES)
    return decode_record(buf)


def write_ppm(path, img: np.ndarray) -> None:
    """Dump one RGB raster as a binary portable pixmap (P6)."""
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
