"""Pixel-level primitives: color conversion, chroma blurring, resampling, crops.

Images are numpy arrays of shape (H, W, 3), dtype uint8, row-major interleaved
RGB. All intermediate math runs in float64 and quantizes once, at the final
8-bit output. Every function here is pure and deterministic: identical inputs
produce bit-identical outputs, so they are safe to call from any number of
workers at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

__all__ = [
    "LabImage",
    "ResampleMethod",
    "rgb_to_lab",
    "lab_to_rgb",
    "box_blur",
    "chroma_blur",
    "resample",
    "aspect_resize_center_crop",
]

CHROMA_BLUR_WINDOW = 13


def _rgb_to_xyz_matrix() -> np.ndarray:
    """RGB -> XYZ matrix derived from the sRGB primaries and D65 white.

    Deriving from chromaticities (rather than hardcoding rounded constants)
    makes the matrix rows sum to the white point to machine precision, which
    keeps the gray axis exact downstream.
    """
    # (x, y) chromaticities: R, G, B primaries and D65 white.
    primaries = np.array([[0.64, 0.33], [0.30, 0.60], [0.15, 0.06]])
    xw, yw = 0.3127, 0.3290
    cols = np.array([[x / y, 1.0, (1.0 - x - y) / y] for x, y in primaries]).T
    white = np.array([xw / yw, 1.0, (1.0 - xw - yw) / yw])
    scale = np.linalg.solve(cols, white)
    return cols * scale


_M_RGB_XYZ = _rgb_to_xyz_matrix()
_WHITE = _M_RGB_XYZ.sum(axis=1)
# Rows normalized by the white point; each row sums to 1, so t = XYZ/white is
# evaluated in the gray-factored form below and neutral inputs give exactly
# equal (tx, ty, tz).
_M_NORM = _M_RGB_XYZ / _WHITE[:, None]
_M_NORM_EXACT = _M_NORM.copy()
_M_NORM_EXACT[:, 2] = 1.0 - _M_NORM[:, 0] - _M_NORM[:, 1]
_M_NORM_INV = np.linalg.inv(_M_NORM_EXACT)

_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LabImage:
    """CIELAB raster as three float64 planes of identical shape."""

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not (self.L.shape == self.a.shape == self.b.shape):
            raise ValueError("L, a, b planes must share one shape")
        if self.L.ndim != 2:
            raise ValueError("Lab planes must be 2-D")

    @property
    def height(self) -> int:
        return self.L.shape[0]

    @property
    def width(self) -> int:
        return self.L.shape[1]


class ResampleMethod(enum.Enum):
    BILINEAR = "bilinear"
    AREA = "area"
    BICUBIC = "bicubic"
    LANCZOS = "lanczos"


def _check_rgb(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")


def _decode_table() -> np.ndarray:
    """Linear-light value of each 8-bit sRGB code (the exact transfer curve)."""
    c = np.arange(256, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _encode_thresholds() -> np.ndarray:
    """Linear-light decision boundaries between adjacent 8-bit output codes.

    Code k is emitted for linear values in [t[k-1], t[k]); the boundaries are
    the exact inverse transfer curve at the half-count levels, so a binary
    search reproduces round-to-nearest encoding without per-pixel pow.
    """
    y = (np.arange(255, dtype=np.float64) + 0.5) / 255.0
    return np.where(y <= 0.04045, y / 12.92, ((y + 0.055) / 1.055) ** 2.4)


_SRGB_DECODE_LUT = _decode_table()
_SRGB_ENCODE_EDGES = _encode_thresholds()


def _encode_buckets(buckets: int = 4096):
    """Bucketized encode: maps linear light to 8-bit codes in O(1).

    The encode curve's steepest slope (12.92 at the toe) times 255 output
    codes over `buckets` uniform cells stays below one code boundary per
    cell, so each cell needs at most one threshold comparison: the cell's
    base code and the single edge that may upgrade it by one.
    """
    assert 12.92 * 255.0 / buckets < 1.0
    starts = np.arange(buckets, dtype=np.float64) / buckets
    base = np.searchsorted(_SRGB_ENCODE_EDGES, starts, side="right").astype(np.uint8)
    # Edge that may fall inside the cell; cells above code 254 have none.
    edge = np.where(base < 255, _SRGB_ENCODE_EDGES[np.minimum(base, 254)], np.inf)
    return base, edge


_SRGB_ENCODE_BASE, _SRGB_ENCODE_EDGE = _encode_buckets()
_SRGB_ENCODE_BUCKETS = _SRGB_ENCODE_BASE.shape[0]


@njit(cache=True)
def _rgb_to_lab_kernel(flat, lut, a00, a01, a10, a11, a20, a21, lum, ca, cb):
    d3 = (6.0 / 29.0) ** 3
    toe = 1.0 / (3.0 * (6.0 / 29.0) ** 2)
    offset = 4.0 / 29.0
    for i in range(flat.shape[0]):
        r = lut[flat[i, 0]]
        g = lut[flat[i, 1]]
        b = lut[flat[i, 2]]
        dr = r - b
        dg = g - b
        tx = b + a00 * dr + a01 * dg
        ty = b + a10 * dr + a11 * dg
        tz = b + a20 * dr + a21 * dg
        fx = np.cbrt(tx) if tx > d3 else tx * toe + offset
        fy = np.cbrt(ty) if ty > d3 else ty * toe + offset
        fz = np.cbrt(tz) if tz > d3 else tz * toe + offset
        lum[i] = 116.0 * fy - 16.0
        ca[i] = 500.0 * (fx - fy)
        cb[i] = 200.0 * (fy - fz)


@njit(cache=True)
def _lab_to_rgb_kernel(lum, ca, cb, minv, n_buckets, bucket_base, bucket_edge, out):
    delta = 6.0 / 29.0
    toe = 3.0 * delta * delta
    offset = 4.0 / 29.0
    for i in range(lum.shape[0]):
        fy = (lum[i] + 16.0) / 116.0
        fx = fy + ca[i] / 500.0
        fz = fy - cb[i] / 200.0
        tx = fx * fx * fx if fx > delta else toe * (fx - offset)
        ty = fy * fy * fy if fy > delta else toe * (fy - offset)
        tz = fz * fz * fz if fz > delta else toe * (fz - offset)
        for c in range(3):
            lin = minv[c, 0] * tx + minv[c, 1] * ty + minv[c, 2] * tz
            if lin <= 0.0:
                out[i, c] = 0
            elif lin >= 1.0:
                out[i, c] = 255
            else:
                cell = int(lin * n_buckets)
                code = bucket_base[cell]
                if lin >= bucket_edge[cell]:
                    code += 1
                out[i, c] = code


def rgb_to_lab(img: np.ndarray) -> LabImage:
    """Convert an 8-bit sRGB image to CIELAB (D65 white point).

    Neutral pixels (r == g == b) map to a == b == 0.0 exactly: the white-
    normalized matrix rows sum to 1 and the dot products are evaluated
    relative to the blue channel, so the three f() arguments are the same
    float for gray input.
    """
    _check_rgb(img)
    h, w = img.shape[:2]
    flat = np.ascontiguousarray(img).reshape(-1, 3)
    lum = np.empty(h * w)
    ca = np.empty(h * w)
    cb = np.empty(h * w)
    m = _M_NORM
    _rgb_to_lab_kernel(flat, _SRGB_DECODE_LUT, m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[2, 0], m[2, 1], lum, ca, cb)
    return LabImage(L=lum.reshape(h, w), a=ca.reshape(h, w), b=cb.reshape(h, w))


def lab_to_rgb(lab: LabImage) -> np.ndarray:
    """Convert CIELAB back to 8-bit sRGB, clamping out-of-gamut values."""
    h, w = lab.L.shape
    out = np.empty((h * w, 3), dtype=np.uint8)
    _lab_to_rgb_kernel(
        np.ascontiguousarray(lab.L).reshape(-1),
        np.ascontiguousarray(lab.a).reshape(-1),
        np.ascontiguousarray(lab.b).reshape(-1),
        _M_NORM_INV,
        _SRGB_ENCODE_BUCKETS,
        _SRGB_ENCODE_BASE,
        _SRGB_ENCODE_EDGE,
        out,
    )
    return out.reshape(h, w, 3)


def box_blur(plane: np.ndarray, k: int) -> np.ndarray:
    """Mean filter with a k x k window and replicate (edge-clamp) borders.

    k must be odd and positive; it may exceed the plane size (the clamped
    border supplies the missing samples).
    """
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise ValueError(f"window size must be a positive odd integer, got {k}")
    if plane.ndim != 2:
        raise ValueError("box_blur expects a 2-D plane")
    if k == 1:
        return plane.astype(np.float64, copy=True)
    pad = k // 2
    padded = np.pad(plane.astype(np.float64), pad, mode="edge")
    summed = _sliding_sum(_sliding_sum(padded, k, axis=0), k, axis=1)
    return summed / float(k * k)


def _sliding_sum(arr: np.ndarray, k: int, axis: int) -> np.ndarray:
    """Sums of length-k windows along one axis via a cumulative sum."""
    c = np.cumsum(arr, axis=axis, dtype=np.float64)
    if axis == 0:
        head, body = c[k - 1 : k], c[k:] - c[: c.shape[0] - k]
    else:
        head, body = c[:, k - 1 : k], c[:, k:] - c[:, : c.shape[1] - k]
    return np.concatenate([head, body], axis=axis)


def chroma_blur(img: np.ndarray, k: int = CHROMA_BLUR_WINDOW) -> np.ndarray:
    """Blur the a/b chroma planes while leaving luminance untouched.

    The image is taken to CIELAB, both chroma planes pass through box_blur,
    and the result is converted back to RGB with clamping. Grayscale input
    has a == b == 0 everywhere and survives almost unchanged (round-trip
    quantization only).
    """
    lab = rgb_to_lab(img)
    blurred = LabImage(L=lab.L, a=box_blur(lab.a, k), b=box_blur(lab.b, k))
    return lab_to_rgb(blurred)


def _kernel_bilinear(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(x))


def _kernel_bicubic(x: np.ndarray) -> np.ndarray:
    # Catmull-Rom: cubic convolution with a = -0.5.
    ax = np.abs(x)
    near = 1.5 * ax**3 - 2.5 * ax**2 + 1.0
    far = -0.5 * ax**3 + 2.5 * ax**2 - 4.0 * ax + 2.0
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def _kernel_lanczos(x: np.ndarray) -> np.ndarray:
    # np.sinc is the normalized sinc, sin(pi x) / (pi x), exact at integers.
    return np.where(np.abs(x) < 3.0, np.sinc(x) * np.sinc(x / 3.0), 0.0)


_KERNELS = {
    ResampleMethod.BILINEAR: (_kernel_bilinear, 1),
    ResampleMethod.BICUBIC: (_kernel_bicubic, 2),
    ResampleMethod.LANCZOS: (_kernel_lanczos, 3),
}


@lru_cache(maxsize=512)
def _axis_taps(n_in: int, n_out: int, method: ResampleMethod):
    """Per-output source indices and weights for one axis.

    Returns (idx, w) with shape (n_out, taps); indices are edge-clamped and
    weight rows are normalized so constants map to constants.
    """
    if method is ResampleMethod.AREA:
        scale = n_in / n_out
        rows_idx, rows_w = [], []
        for i in range(n_out):
            lo, hi = i * scale, (i + 1) * scale
            first = int(np.floor(lo))
            last = min(int(np.ceil(hi)) - 1, n_in - 1)
            idx = np.arange(first, last + 1)
            w = np.minimum(hi, idx + 1.0) - np.maximum(lo, idx.astype(np.float64))
            rows_idx.append(idx)
            rows_w.append(w / w.sum())
        taps = max(len(r) for r in rows_idx)
        idx = np.zeros((n_out, taps), dtype=np.intp)
        w = np.zeros((n_out, taps), dtype=np.float64)
        for i, (ri, rw) in enumerate(zip(rows_idx, rows_w)):
            idx[i, : len(ri)] = ri
            w[i, : len(rw)] = rw
        return idx, w

    kernel, support = _KERNELS[method]
    centers = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(centers).astype(np.intp)
    offsets = np.arange(1 - support, support + 1)
    idx = base[:, None] + offsets[None, :]
    w = kernel(centers[:, None] - idx)
    w = w / w.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, n_in - 1), w


@njit(cache=True)
def _resample_kernel(img, idx_y, w_y, idx_x, w_x, out):
    """Separable two-pass resize over explicit taps.

    Each output row is produced independently (vertical pass into a row
    buffer, then the horizontal pass), so resampling a row/column window of
    the output is bit-identical to slicing a full resize.
    """
    oh, ty = idx_y.shape
    ow, tx = idx_x.shape
    w = img.shape[1]
    tmp = np.empty((w, 3))
    for o in range(oh):
        for x in range(w):
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            for t in range(ty):
                wt = w_y[o, t]
                yy = idx_y[o, t]
                a0 += wt * img[yy, x, 0]
                a1 += wt * img[yy, x, 1]
                a2 += wt * img[yy, x, 2]
            tmp[x, 0] = a0
            tmp[x, 1] = a1
            tmp[x, 2] = a2
        for v in range(ow):
            for c in range(3):
                acc = 0.0
                for t in range(tx):
                    acc += w_x[v, t] * tmp[idx_x[v, t], c]
                if acc < 0.0:
                    acc = 0.0
                elif acc > 255.0:
                    acc = 255.0
                out[o, v, c] = np.rint(acc)


def _run_resample(img, idx_y, w_y, idx_x, w_x) -> np.ndarray:
    out = np.empty((idx_y.shape[0], idx_x.shape[0], 3), dtype=np.uint8)
    _resample_kernel(img, idx_y, w_y, idx_x, w_x, out)
    return out


def resample(img: np.ndarray, out_w: int, out_h: int, method: ResampleMethod) -> np.ndarray:
    """Resize with one of four fixed kernels.

    Bilinear, bicubic (Catmull-Rom) and Lanczos (support 3) are interpolation
    kernels with pixel-center alignment; area averages each output pixel's
    source footprint. Output is clamped to [0, 255] and re-quantized.
    """
    _check_rgb(img)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    method = ResampleMethod(method)
    h, w = img.shape[:2]
    idx_y, w_y = _axis_taps(h, out_h, method)
    idx_x, w_x = _axis_taps(w, out_w, method)
    return _run_resample(img, idx_y, w_y, idx_x, w_x)


def resample_window(
    img: np.ndarray, out_w: int, out_h: int, method: ResampleMethod,
    x0: int, y0: int, win_w: int, win_h: int,
) -> np.ndarray:
    """The (x0, y0, win_w, win_h) window of resample(img, out_w, out_h).

    Computes only the windowed output rows and columns; bit-identical to
    cropping the full resize because the kernel treats rows independently.
    """
    _check_rgb(img)
    if not (0 <= x0 and 0 <= y0 and x0 + win_w <= out_w and y0 + win_h <= out_h):
        raise ValueError("window leaves the resize target")
    method = ResampleMethod(method)
    h, w = img.shape[:2]
    idx_y, w_y = _axis_taps(h, out_h, method)
    idx_x, w_x = _axis_taps(w, out_w, method)
    return _run_resample(
        img, idx_y[y0 : y0 + win_h], w_y[y0 : y0 + win_h],
        idx_x[x0 : x0 + win_w], w_x[x0 : x0 + win_w],
    )


def aspect_resize_center_crop(img: np.ndarray, side: int, method: ResampleMethod) -> np.ndarray:
    """Scale so the smaller dimension equals `side`, then center-crop square.

    The larger dimension is rounded to the nearest pixel; an odd crop
    remainder puts the extra pixel on the right/bottom.
    """
    _check_rgb(img)
    if side < 1:
        raise ValueError("side must be positive")
    h, w = img.shape[:2]
    if w <= h:
        new_w, new_h = side, max(side, int(np.floor(h * side / w + 0.5)))
    else:
        new_w, new_h = max(side, int(np.floor(w * side / h + 0.5))), side
    resized = resample(img, new_w, new_h, method)
    x0 = (new_w - side) // 2
    y0 = (new_h - side) // 2
    return resized[y0 : y0 + side, x0 : x0 + side].copy()
