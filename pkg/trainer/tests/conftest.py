"""Shared fixtures: a structured synthetic corpus pushed through the
generator CLI (the only coupling to the producer is its command line and
file formats)."""

import subprocess
import sys

import numpy as np
import pytest
from PIL import Image


def make_structured_image(rng: np.random.Generator, side: int = 420) -> np.ndarray:
    """Position-coded content: each grid cell's mean color identifies it.

    Red ramps left to right, green top to bottom, blue is an image-specific
    constant; light texture noise keeps the task non-degenerate.
    """
    yy, xx = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    img = np.empty((side, side, 3), dtype=np.float64)
    img[..., 0] = 255.0 * xx / (side - 1)
    img[..., 1] = 255.0 * yy / (side - 1)
    img[..., 2] = rng.integers(40, 216)
    img += rng.normal(0.0, 8.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def shard_dir(tmp_path_factory):
    """Generate 80 structured images -> shards (20 classes, no rotations)."""
    root = tmp_path_factory.mktemp("pretext")
    corpus = root / "corpus"
    corpus.mkdir()
    rng = np.random.default_rng(20240817)
    for i in range(80):
        Image.fromarray(make_structured_image(rng)).save(corpus / f"img{i:03d}.png")

    out = root / "shards"
    cmd = [
        sys.executable, "-m", "patchforge.cli", "generate",
        "--input", str(corpus),
        "--output", str(out),
        "--seed", "42",
        "--rotations", "0",
        "--no-ubt", "--no-ra", "--no-rrm", "--no-cb",
        "--holdout-fraction", "0.2",
        "--shard-records", "256",
    ]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    return out


@pytest.fixture(scope="session")
def manifest_path(shard_dir):
    return shard_dir / "manifest.json"
