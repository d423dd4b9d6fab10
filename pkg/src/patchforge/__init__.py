"""Deterministic patch-set sample generation for context-based pretraining."""

from .augment import AugmentConfig, PRESETS, make_sample, sample_rng
from .imgproc import ResampleMethod, aspect_resize_center_crop, box_blur, chroma_blur
from .labels import ClassSpace, decode, encode
from .patchgrid import ConfigCatalog, PatchSet, default_catalog, load_catalog, save_catalog
from .pipeline import PipelineConfig, generate, ingest, preprocess_image, stats, verify
from .records import SampleRecord, read_shard, write_shard

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "PRESETS",
    "make_sample",
    "sample_rng",
    "ResampleMethod",
    "aspect_resize_center_crop",
    "box_blur",
    "chroma_blur",
    "ClassSpace",
    "decode",
    "encode",
    "ConfigCatalog",
    "PatchSet",
    "default_catalog",
    "load_catalog",
    "save_catalog",
    "PipelineConfig",
    "generate",
    "ingest",
    "preprocess_image",
    "stats",
    "verify",
    "SampleRecord",
    "read_shard",
    "write_shard",
    "__version__",
]
