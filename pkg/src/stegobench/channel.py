"""Lossy channel simulation: sharpening, resize cycles, and a transform codec.

The codec reproduces the quantization loss of a baseline JPEG encode/decode
cycle (color conversion, optional 4:2:0 chroma subsampling, 8x8 block DCT,
quality-scaled quantization) without the entropy-coding layer, which is
lossless and therefore irrelevant to signal degradation. Every stage maps an
8-bit buffer to an 8-bit buffer of identical geometry, so stages compose
freely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.ndimage import correlate1d

from .blockdct import blockify, dct2, idct2, pad_edge_multiple, unblockify
from .imagecore import (
    GRAY,
    YCBCR,
    ImageBuffer,
    ImageF32,
    ZeroDimensionError,
    quantize_u8,
    resample,
    resample_plane,
    round_half_away,
    rgb_to_ycbcr,
    ycbcr_to_rgb,
)
from .payloadcodec import OutOfRangeError


class UnknownPresetError(ValueError):
    """No channel preset registered under the requested name."""


class DegenerateSizeError(ValueError):
    """Resize scale maps some dimension to zero."""


# Base quantization tables for the transform codec (luminance / chrominance),
# row-major. These are the conventional baseline tables that quality scaling
# is defined against.
BASE_LUMA_QUANT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

BASE_CHROMA_QUANT = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

BASE_LUMA_QUANT.flags.writeable = False
BASE_CHROMA_QUANT.flags.writeable = False


@dataclass(frozen=True)
class QuantTables:
    luma: np.ndarray
    chroma: np.ndarray


@dataclass(frozen=True)
class Sharpen:
    """Unsharp mask stage: out = x + amount * (x - gaussian(x, sigma=radius))."""

    radius: float = 1.0
    amount: float = 0.5

    def __post_init__(self):
        if self.radius <= 0.0:
            raise OutOfRangeError(f"sharpen radius must be > 0, got {self.radius}")
        if self.amount < 0.0:
            raise OutOfRangeError(f"sharpen amount must be >= 0, got {self.amount}")


@dataclass(frozen=True)
class ResizeCycle:
    """Downscale by `scale`, then resample back to the original geometry."""

    scale: float = 0.75
    kernel: str = "lanczos3"

    def __post_init__(self):
        if not (0.0 < self.scale <= 1.0):
            raise OutOfRangeError(f"resize scale must be in (0, 1], got {self.scale}")
        if self.kernel not in ("lanczos3", "bilinear", "box"):
            raise OutOfRangeError(f"unknown resize kernel {self.kernel!r}")


@dataclass(frozen=True)
class CodecCycle:
    """One lossy transform-codec encode/decode cycle at the given quality."""

    quality: int = 90
    subsampling: str = "420"

    def __post_init__(self):
        if not (1 <= int(self.quality) <= 100):
            raise OutOfRangeError(f"quality must be in [1, 100], got {self.quality}")
        if self.subsampling not in ("444", "420"):
            raise OutOfRangeError(f"subsampling must be '444' or '420', got {self.subsampling!r}")


Stage = Union[Sharpen, ResizeCycle, CodecCycle]


@dataclass(frozen=True)
class ChannelSpec:
    """Named, ordered pipeline of channel stages; empty pipeline = identity."""

    name: str
    stages: tuple = ()


# ---------------------------------------------------------------------------
# quantization tables


def quant_tables(quality: int) -> QuantTables:
    """Quality-scaled quantization tables.

    Scaling follows the conventional rule: S = 5000/Q for Q < 50 else
    200 - 2Q, and each entry is clamp(floor((base * S + 50) / 100), 1, 255).
    Q=50 reproduces the base tables, Q=100 gives all-ones.
    """
    quality = int(quality)
    if not (1 <= quality <= 100):
        raise OutOfRangeError(f"quality must be in [1, 100], got {quality}")
    if quality < 50:
        s = 5000.0 / quality
    else:
        s = float(200 - 2 * quality)

    def scale(base: np.ndarray) -> np.ndarray:
        scaled = np.floor((base.astype(np.float64) * s + 50.0) / 100.0)
        return np.clip(scaled, 1, 255).astype(np.int64)

    return QuantTables(luma=scale(BASE_LUMA_QUANT), chroma=scale(BASE_CHROMA_QUANT))


# ---------------------------------------------------------------------------
# stages


def sharpen(img: ImageBuffer, radius: float = 1.0, amount: float = 0.5) -> ImageBuffer:
    """Unsharp mask with a Gaussian of sigma=radius truncated at 3 sigma.

    Applied per channel with replicated edges; output re-quantized with the
    house rounding rule.
    """
    stage = Sharpen(radius=radius, amount=amount)  # validates parameters
    taps = _gaussian_taps(stage.radius)
    planes = []
    for c in range(img.channels):
        x = img.pixels[:, :, c].astype(np.float64)
        blurred = correlate1d(x, taps, axis=0, mode="nearest")
        blurred = correlate1d(blurred, taps, axis=1, mode="nearest")
        planes.append(x + stage.amount * (x - blurred))
    return ImageBuffer(quantize_u8(np.stack(planes, axis=-1)), img.colorspace)


def _gaussian_taps(sigma: float) -> np.ndarray:
    # truncated at 3 sigma, renormalized
    radius = max(1, int(math.floor(3.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def resize_cycle(img: ImageBuffer, scale: float, kernel: str = "lanczos3") -> ImageBuffer:
    """Downscale to round(scale * size) and resample back up with `kernel`."""
    stage = ResizeCycle(scale=scale, kernel=kernel)
    dw = int(round_half_away(stage.scale * img.width))
    dh = int(round_half_away(stage.scale * img.height))
    if dw < 1 or dh < 1:
        raise DegenerateSizeError(f"scale {scale} collapses {img.width}x{img.height} to {dw}x{dh}")
    down = resample(img, dw, dh, stage.kernel)
    return resample(down, img.width, img.height, stage.kernel)


def codec_cycle(img: ImageBuffer, quality: int, subsampling: str = "420") -> ImageBuffer:
    """One transform-codec cycle: the quantization loss of a JPEG round trip.

    RGB input is converted to YCbCr; with '420' the chroma planes are 2x2
    box-downsampled before coding and bilinearly upsampled after. Each plane
    is edge-padded to a multiple of 8, level-shifted by -128, block-DCT'd,
    quantized coefficient-wise (round half away from zero) against the
    quality-scaled table, dequantized, inverse transformed, and cropped back.
    Grayscale input runs the luminance path only.
    """
    stage = CodecCycle(quality=quality, subsampling=subsampling)
    tables = quant_tables(stage.quality)
    if img.colorspace == GRAY:
        plane = img.pixels[:, :, 0].astype(np.float64)
        rec = _codec_plane(plane, tables.luma)
        return ImageBuffer(quantize_u8(rec)[:, :, np.newaxis], GRAY)

    ycc = rgb_to_ycbcr(img).samples.astype(np.float64)
    y = _codec_plane(ycc[:, :, 0], tables.luma)
    if stage.subsampling == "444":
        cb = _codec_plane(ycc[:, :, 1], tables.chroma)
        cr = _codec_plane(ycc[:, :, 2], tables.chroma)
    else:
        cb = _codec_chroma_420(ycc[:, :, 1], tables.chroma)
        cr = _codec_chroma_420(ycc[:, :, 2], tables.chroma)
    out = np.stack([y, cb, cr], axis=-1)
    return ycbcr_to_rgb(ImageF32(out.astype(np.float32), YCBCR))


def _codec_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    padded = pad_edge_multiple(plane, 8)
    blocks = blockify(padded) - 128.0
    coeffs = dct2(blocks)
    t = table.astype(np.float64)
    quantized = round_half_away(coeffs / t) * t
    rec = unblockify(idct2(quantized)) + 128.0
    return rec[:h, :w]


def _codec_chroma_420(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    # 2x2 box down (edge-padded to even dims), code at quarter resolution,
    # bilinear back up to the full plane geometry.
    h, w = plane.shape
    even = pad_edge_multiple(plane, 2)
    eh, ew = even.shape
    small = even.reshape(eh // 2, 2, ew // 2, 2).mean(axis=(1, 3))
    coded = _codec_plane(small, table)
    return resample_plane(coded, w, h, "bilinear")


# ---------------------------------------------------------------------------
# pipelines and presets


def apply_channel(img: ImageBuffer, spec: ChannelSpec) -> ImageBuffer:
    """Run all stages in order. Geometry and bit depth are preserved."""
    out = img
    for stage in spec.stages:
        if isinstance(stage, Sharpen):
            out = sharpen(out, stage.radius, stage.amount)
        elif isinstance(stage, ResizeCycle):
            out = resize_cycle(out, stage.scale, stage.kernel)
        elif isinstance(stage, CodecCycle):
            out = codec_cycle(out, stage.quality, stage.subsampling)
        else:
            raise TypeError(f"unknown channel stage {stage!r}")
    return out


_PRESETS = {
    # Social-platform approximations: the pass-through platforms apply no
    # recompression at typical upload sizes; the aggressive one recompresses
    # with subsampled chroma.
    "x-sim": (),
    "instagram-sim": (),
    "facebook-sim": (CodecCycle(quality=90, subsampling="420"),),
    # Single-factor probes.
    "jpeg75": (CodecCycle(quality=75, subsampling="420"),),
    "jpeg95": (CodecCycle(quality=95, subsampling="420"),),
    "subsample420": (CodecCycle(quality=100, subsampling="420"),),
    "resize075": (ResizeCycle(scale=0.75, kernel="lanczos3"),),
    "sharpen": (Sharpen(radius=1.0, amount=0.5),),
    "identity": (),
}


def platform_preset(name: str) -> ChannelSpec:
    """Look up a named channel preset."""
    if name not in _PRESETS:
        known = ", ".join(sorted(_PRESETS))
        raise UnknownPresetError(f"unknown preset {name!r} (known: {known})")
    return ChannelSpec(name=name, stages=_PRESETS[name])


def preset_names() -> list[str]:
    return sorted(_PRESETS)


# ---------------------------------------------------------------------------
# serialization


def channel_to_dict(spec: ChannelSpec) -> dict:
    stages = []
    for stage in spec.stages:
        if isinstance(stage, Sharpen):
            stages.append({"kind": "sharpen", "radius": stage.radius, "amount": stage.amount})
        elif isinstance(stage, ResizeCycle):
            stages.append({"kind": "resize_cycle", "scale": stage.scale, "kernel": stage.kernel})
        elif isinstance(stage, CodecCycle):
            stages.append(
                {"kind": "codec_cycle", "quality": stage.quality, "subsampling": stage.subsampling}
            )
        else:
            raise TypeError(f"unknown channel stage {stage!r}")
    return {"name": spec.name, "stages": stages}


def channel_from_dict(d: dict) -> ChannelSpec:
    stages = []
    for sd in d.get("stages", ()):
        kind = sd.get("kind")
        if kind == "sharpen":
            stages.append(Sharpen(radius=float(sd["radius"]), amount=float(sd["amount"])))
        elif kind == "resize_cycle":
            stages.append(ResizeCycle(scale=float(sd["scale"]), kernel=str(sd.get("kernel", "lanczos3"))))
        elif kind == "codec_cycle":
            stages.append(
                CodecCycle(quality=int(sd["quality"]), subsampling=str(sd.get("subsampling", "420")))
            )
        else:
            raise ValueError(f"unknown stage kind {kind!r}")
    return ChannelSpec(name=str(d.get("name", "custom")), stages=tuple(stages))


def save_channel(spec: ChannelSpec, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(spec), indent=2) + "\n", encoding="utf-8")


def load_channel(path) -> ChannelSpec:
    return channel_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
