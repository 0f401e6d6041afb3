"""Raster buffers, color conversion, resampling, and lossless image file I/O.

Pixel data is 8-bit, row-major ``(height, width, channels)``. The only
supported output format is PNG: anything lossy has to happen inside an
explicit channel simulation, never at the file layer. Binary PPM (P6) and
PGM (P5) are additionally accepted on read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

RGB = "RGB"
YCBCR = "YCbCr"
GRAY = "Gray"

_CHANNELS = {RGB: 3, YCBCR: 3, GRAY: 1}

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class UnsupportedFormatError(ValueError):
    """Not a PNG / binary PPM / binary PGM file, or an unsupported variant."""


class CorruptStreamError(ValueError):
    """Recognized format, but the stream is truncated or inconsistent."""


class WrongColorspaceError(ValueError):
    """Operation applied to a buffer in the wrong colorspace."""


class ZeroDimensionError(ValueError):
    """Requested raster geometry has a zero or negative dimension."""


def round_half_away(x):
    """Round to nearest integer with halves away from zero.

    ``np.round`` rounds halves to even. Every rounding site in the package
    goes through here instead, so quantized results are reproducible bit for
    bit across runs and platforms.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_u8(x) -> np.ndarray:
    """Produce 8-bit samples: round half away from zero, then clamp to [0, 255]."""
    return np.clip(round_half_away(x), 0.0, 255.0).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """An 8-bit raster: ``pixels`` is ``(height, width, channels)`` uint8.

    The pixel array is copied and frozen on construction; treat buffers as
    immutable values. ``colorspace`` is one of ``RGB``, ``YCbCr``, ``Gray``
    (``Gray`` always has one channel, the others three).
    """

    pixels: np.ndarray
    colorspace: str = RGB

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"pixels must be (H, W, C), got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {arr.dtype}")
        if self.colorspace not in _CHANNELS:
            raise WrongColorspaceError(f"unknown colorspace {self.colorspace!r}")
        if arr.shape[2] != _CHANNELS[self.colorspace]:
            raise ValueError(
                f"{self.colorspace} needs {_CHANNELS[self.colorspace]} channels, "
                f"got {arr.shape[2]}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ZeroDimensionError(f"empty raster {arr.shape}")
        # always copy: freezing a view would lock the caller's buffer too
        arr = np.array(arr, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.colorspace == other.colorspace and np.array_equal(
            self.pixels, other.pixels
        )

    def __repr__(self) -> str:
        return (
            f"ImageBuffer({self.height}x{self.width}x{self.channels}, "
            f"{self.colorspace})"
        )


@dataclass(frozen=True, eq=False)
class ImageF32:
    """Float raster used for transform intermediates; all samples finite."""

    samples: np.ndarray
    colorspace: str = YCBCR

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"samples must be (H, W, C), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite samples")
        arr = np.array(arr, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]


# ---------------------------------------------------------------------------
# file I/O


def read_image(path) -> ImageBuffer:
    """Read a PNG, binary PPM (P6), or binary PGM (P5) file.

    Only 8-bit grayscale and 8-bit truecolor variants are accepted. Palette,
    alpha, 16-bit, and interlaced inputs raise UnsupportedFormatError;
    truncated or inconsistent streams raise CorruptStreamError.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == PNG_MAGIC:
        return _read_png(path)
    if data[:2] in (b"P5", b"P6"):
        return _parse_pnm(data, path)
    raise UnsupportedFormatError(f"{path}: not a PNG or binary PNM file")


def write_image(img: ImageBuffer, path) -> None:
    """Write an RGB or Gray buffer as PNG. Lossless: a read-back is sample-exact."""
    if img.colorspace == YCBCR:
        raise WrongColorspaceError("refusing to write YCbCr samples as PNG")
    path = Path(path)
    if img.channels == 1:
        pil = Image.fromarray(img.pixels[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(img.pixels, mode="RGB")
    pil.save(str(path), format="PNG")


def _read_png(path: Path) -> ImageBuffer:
    try:
        with Image.open(path) as pil:
            pil.load()
            mode = pil.mode
            if mode == "L":
                arr = np.asarray(pil, dtype=np.uint8)[:, :, np.newaxis]
                return ImageBuffer(arr, GRAY)
            if mode == "RGB":
                return ImageBuffer(np.asarray(pil, dtype=np.uint8), RGB)
            raise UnsupportedFormatError(
                f"{path}: PNG mode {mode!r} not supported (8-bit gray or truecolor only)"
            )
    except UnidentifiedImageError as exc:
        raise CorruptStreamError(f"{path}: unreadable PNG stream") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptStreamError(f"{path}: corrupt PNG stream ({exc})") from exc


def _parse_pnm(data: bytes, path: Path) -> ImageBuffer:
    # Binary PNM header: magic, then width/height/maxval as ASCII decimals
    # separated by whitespace, '#' comments allowed, one whitespace byte
    # before the sample payload.
    channels = 3 if data[:2] == b"P6" else 1
    pos, n = 2, len(data)
    fields: list[int] = []
    while len(fields) < 3:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptStreamError(f"{path}: truncated PNM header")
        token = data[start:pos]
        if not token.isdigit():
            raise CorruptStreamError(f"{path}: bad PNM header token {token!r}")
        fields.append(int(token))
    if pos >= n:
        raise CorruptStreamError(f"{path}: missing PNM sample payload")
    pos += 1  # exactly one whitespace byte after maxval
    width, height, maxval = fields
    if maxval > 255:
        raise UnsupportedFormatError(f"{path}: only 8-bit PNM supported, maxval={maxval}")
    if width < 1 or height < 1 or maxval < 1:
        raise CorruptStreamError(f"{path}: bad PNM geometry {width}x{height}/{maxval}")
    need = width * height * channels
    raw = data[pos : pos + need]
    if len(raw) < need:
        raise CorruptStreamError(
            f"{path}: expected {need} sample bytes, got {len(raw)}"
        )
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(arr, GRAY if channels == 1 else RGB)


# ---------------------------------------------------------------------------
# color conversion (BT.601 full range)


def rgb_to_ycbcr(img: ImageBuffer) -> ImageF32:
    """Convert 8-bit RGB to real-valued YCbCr (BT.601, full range).

        Y  =       0.299 R + 0.587 G + 0.114 B
        Cb = 128 - 0.168736 R - 0.331264 G + 0.5 B
        Cr = 128 + 0.5 R - 0.418688 G - 0.081312 B

    Outputs are clamped to [0, 255] but not rounded; downstream transforms
    work on the real values.
    """
    if img.colorspace != RGB:
        raise WrongColorspaceError(f"expected RGB input, got {img.colorspace}")
    rgb = img.pixels.astype(np.float64)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    out = np.clip(np.stack([y, cb, cr], axis=-1), 0.0, 255.0)
    return ImageF32(out, YCBCR)


def ycbcr_to_rgb(img: ImageF32) -> ImageBuffer:
    """Invert `rgb_to_ycbcr`: back to 8-bit RGB with round-half-away + clamp."""
    if img.colorspace != YCBCR:
        raise WrongColorspaceError(f"expected YCbCr input, got {img.colorspace}")
    ycc = img.samples.astype(np.float64)
    y = ycc[:, :, 0]
    cb = ycc[:, :, 1] - 128.0
    cr = ycc[:, :, 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return ImageBuffer(quantize_u8(np.stack([r, g, b], axis=-1)), RGB)


def luma_plane(img: ImageBuffer) -> np.ndarray:
    """Luminance of a buffer as a float64 (H, W) plane, BT.601 for RGB."""
    if img.colorspace == GRAY:
        return img.pixels[:, :, 0].astype(np.float64)
    if img.colorspace == YCBCR:
        return img.pixels[:, :, 0].astype(np.float64)
    rgb = img.pixels.astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


# ---------------------------------------------------------------------------
# resampling


def _lanczos3(x: np.ndarray) -> np.ndarray:
    # sinc(x) * sinc(x/3) on |x| < 3, with the 0/0 limit handled
    ax = np.abs(x)
    out = np.sinc(x) * np.sinc(x / 3.0)
    return np.where(ax < 3.0, out, 0.0)


def _bilinear(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(x))


def _box(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) <= 0.5, 1.0, 0.0)


KERNELS = {
    "lanczos3": (3.0, _lanczos3),
    "bilinear": (1.0, _bilinear),
    "box": (0.5, _box),
}


@lru_cache(maxsize=256)
def _resample_matrix(src: int, dst: int, kernel: str) -> np.ndarray:
    """Dense (dst, src) weight matrix for one separable axis.

    Output pixel centers map to source coordinates via
    ``center = (i + 0.5) * src / dst``; when minifying, the kernel is widened
    by the scale ratio for anti-aliasing. Source indices are clamped at the
    edges and every output row is normalized to unit weight sum.
    """
    if kernel not in KERNELS:
        raise ValueError(f"unknown resample kernel {kernel!r}")
    support, fn = KERNELS[kernel]
    ratio = src / dst
    scale = max(ratio, 1.0)
    radius = support * scale
    mat = np.zeros((dst, src), dtype=np.float64)
    for i in range(dst):
        center = (i + 0.5) * ratio
        lo = int(math.ceil(center - radius - 0.5))
        hi = int(math.floor(center + radius - 0.5))
        taps = np.arange(lo, hi + 1)
        w = fn((taps + 0.5 - center) / scale)
        clamped = np.clip(taps, 0, src - 1)
        np.add.at(mat[i], clamped, w)
        total = mat[i].sum()
        if total <= 0.0:  # cannot happen for the shipped kernels
            raise ValueError(f"degenerate kernel row at {i}")
        mat[i] /= total
    mat.flags.writeable = False
    return mat


def resample_plane(plane: np.ndarray, new_w: int, new_h: int, kernel: str) -> np.ndarray:
    """Separable resample of a 2D float plane; returns float64, no rounding."""
    if new_w < 1 or new_h < 1:
        raise ZeroDimensionError(f"target {new_w}x{new_h}")
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    out = _resample_matrix(h, new_h, kernel) @ plane
    out = out @ _resample_matrix(w, new_w, kernel).T
    return out


def resample(img: ImageBuffer, new_w: int, new_h: int, kernel: str = "lanczos3") -> ImageBuffer:
    """Resample a buffer to (new_w, new_h) with the named separable kernel.

    Kernels: ``lanczos3`` (3-lobe windowed sinc), ``bilinear``, ``box``.
    Samples are produced with the house rounding rule.
    """
    if kernel not in KERNELS:
        raise ValueError(f"unknown resample kernel {kernel!r}")
    if new_w < 1 or new_h < 1:
        raise ZeroDimensionError(f"target {new_w}x{new_h}")
    planes = [
        resample_plane(img.pixels[:, :, c].astype(np.float64), new_w, new_h, kernel)
        for c in range(img.channels)
    ]
    return ImageBuffer(quantize_u8(np.stack(planes, axis=-1)), img.colorspace)
