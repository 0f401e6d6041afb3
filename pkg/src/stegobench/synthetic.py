"""Deterministic synthetic covers and payloads for desk-scale experiments.

Covers are multi-octave smooth random fields with mild grain, centered at
mid-gray and compressed into a saturation-safe range so embedding transforms
never clip. Everything is a pure function of the seed.
"""

from __future__ import annotations

import numpy as np

from .imagecore import GRAY, RGB, ImageBuffer, quantize_u8, resample_plane

_KEY_MASK = 0xFFFFFFFFFFFFFFFF

# (grid cells per axis, amplitude): coarse structure down to fine texture
_OCTAVES = ((4, 56.0), (8, 34.0), (16, 16.0), (32, 7.0))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _KEY_MASK))


def _smooth_field(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    field = np.zeros((height, width), dtype=np.float64)
    for cells, amp in _OCTAVES:
        grid = rng.normal(0.0, 1.0, size=(cells, cells))
        field += amp * resample_plane(grid, width, height, "bilinear")
    gx, gy = rng.uniform(-22.0, 22.0, size=2)
    xs = np.linspace(-0.5, 0.5, width)[np.newaxis, :]
    ys = np.linspace(-0.5, 0.5, height)[:, np.newaxis]
    return field + gx * xs + gy * ys


def synth_cover(seed: int, width: int = 256, height: int = 256, channels: int = 3) -> ImageBuffer:
    """One synthetic cover image; identical output for identical arguments."""
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    rng = _rng(seed)
    base = _smooth_field(rng, width, height)
    base -= base.mean()
    peak = max(float(np.max(np.abs(base))), 1e-9)
    base = 128.0 + base * (92.0 / peak)  # roughly [36, 220]
    planes = []
    for _ in range(channels):
        plane = base
        if channels == 3:
            tint = _smooth_field(rng, width, height)
            tint -= tint.mean()
            tpeak = max(float(np.max(np.abs(tint))), 1e-9)
            plane = base + tint * (10.0 / tpeak)
        plane = plane + rng.normal(0.0, 1.0, size=(height, width))
        planes.append(plane)
    stacked = np.stack(planes, axis=-1)
    return ImageBuffer(quantize_u8(stacked), RGB if channels == 3 else GRAY)


def synth_cover_set(
    master_seed: int,
    count: int,
    width: int = 256,
    height: int = 256,
    channels: int = 3,
    offset: int = 0,
) -> list:
    """Covers indexed offset..offset+count-1, each seeded master_seed XOR index."""
    return [
        synth_cover((master_seed ^ (offset + i)) & _KEY_MASK, width, height, channels)
        for i in range(count)
    ]


def synth_secret_image(seed: int, width: int, height: int, channels: int = 3) -> ImageBuffer:
    """A synthetic secret image payload (same family as covers, distinct stream)."""
    return synth_cover((seed ^ 0x5EC2E7) & _KEY_MASK, width, height, channels)


_WORDS = (
    "amber basin cedar dune ember fjord gale harbor inlet juniper kestrel "
    "lagoon meadow nectar orchid pebble quarry ravine summit thicket upland "
    "vessel willow yonder zephyr copper drift ledger marble anchor beacon "
    "cinder lantern prairie saffron timber velvet walnut quartz heron osprey"
).split()


def synth_text(seed: int, min_chars: int = 48, max_chars: int = 96) -> str:
    """A short deterministic pseudo-sentence with length in the given range."""
    if min_chars < 1 or max_chars < min_chars:
        raise ValueError(f"bad length range [{min_chars}, {max_chars}]")
    rng = _rng(seed)
    target = int(rng.integers(min_chars, max_chars + 1))
    words = []
    total = -1  # no leading space
    while total < target:
        word = _WORDS[int(rng.integers(0, len(_WORDS)))]
        words.append(word)
        total += len(word) + 1
    text = " ".join(words)
    return text[:max_chars]
