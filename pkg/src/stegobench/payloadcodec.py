"""Payload conversion between text, images, and bitstreams, plus repetition coding.

Bit order is MSB-first within each byte. Decoding back to text must never
fail: invalid UTF-8 becomes U+FFFD and a trailing partial byte is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import GRAY, RGB, ImageBuffer


class OutOfRangeError(ValueError):
    """Parameter outside its documented domain."""


class RepetitionError(ValueError):
    """Repetition factor must be an odd positive integer."""


class LengthMismatchError(ValueError):
    """Bitstream length inconsistent with the requested decode."""


@dataclass(frozen=True, eq=False)
class BitString:
    """Immutable sequence of bits stored as a uint8 array of 0/1 values."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @classmethod
    def from01(cls, text: str) -> "BitString":
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))

    def to01(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __getitem__(self, key) -> "BitString":
        if isinstance(key, slice):
            return BitString(self.bits[key])
        raise TypeError("BitString supports slice indexing only")

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        head = self.to01() if len(self) <= 32 else self.to01()[:32] + "..."
        return f"BitString({len(self)}: {head})"


@dataclass(frozen=True)
class PayloadRate:
    """Embedding demand of a secret image at a given resolution ratio."""

    ratio: float
    bits_per_pixel: float


def text_to_bits(text: str) -> BitString:
    """UTF-8 encode and unpack to bits, MSB first within each byte."""
    raw = np.frombuffer(text.encode("utf-8"), dtype=np.uint8)
    return BitString(np.unpackbits(raw))


def bits_to_text(bits: BitString) -> str:
    """Pack bits to bytes (dropping a trailing partial byte) and decode UTF-8.

    Never raises on malformed input: undecodable byte sequences are replaced
    with U+FFFD.
    """
    n = (len(bits) // 8) * 8
    if n == 0:
        return ""
    raw = np.packbits(bits.bits[:n]).tobytes()
    return raw.decode("utf-8", errors="replace")


def image_to_bits(img: ImageBuffer) -> BitString:
    """Serialize raw samples row-major to bits, MSB first (8 bits per sample)."""
    return BitString(np.unpackbits(img.pixels.reshape(-1)))


def bits_to_image(bits: BitString, width: int, height: int, channels: int) -> ImageBuffer:
    """Rebuild an image from a raw sample bitstream produced by `image_to_bits`."""
    need = width * height * channels * 8
    if len(bits) != need:
        raise LengthMismatchError(f"need {need} bits for {height}x{width}x{channels}, got {len(bits)}")
    samples = np.packbits(bits.bits).reshape(height, width, channels)
    return ImageBuffer(samples, GRAY if channels == 1 else RGB)


def payload_rate(ratio: float) -> PayloadRate:
    """Demand of a 24-bit secret image at `ratio` times the cover's linear size.

    bits_per_pixel = 24 * ratio**2, e.g. ratio 1/4 -> 1.5 bpp and ratio 1 ->
    24 bpp relative to the cover pixel count.
    """
    if not (0.0 < ratio <= 1.0):
        raise OutOfRangeError(f"ratio must be in (0, 1], got {ratio}")
    return PayloadRate(ratio=ratio, bits_per_pixel=24.0 * ratio * ratio)


def repetition_encode(bits: BitString, r: int) -> BitString:
    """Repeat each bit r times (r odd so majority votes cannot tie)."""
    _check_repetition(r)
    return BitString(np.repeat(bits.bits, r))


def repetition_decode(bits: BitString, r: int) -> BitString:
    """Majority-vote each r-bit block back to one bit."""
    _check_repetition(r)
    if len(bits) % r != 0:
        raise LengthMismatchError(f"length {len(bits)} not a multiple of r={r}")
    votes = bits.bits.reshape(-1, r).sum(axis=1)
    return BitString((votes > r // 2).astype(np.uint8))


def _check_repetition(r: int) -> None:
    if r < 1 or r % 2 == 0:
        raise RepetitionError(f"repetition factor must be odd and >= 1, got {r}")


def random_bits(n: int, seed: int) -> BitString:
    """n uniform random bits from a seeded generator (deterministic)."""
    if n < 0:
        raise OutOfRangeError(f"bit count must be >= 0, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed & 0xFFFFFFFFFFFFFFFF))
    return BitString(rng.integers(0, 2, size=n, dtype=np.uint8))


def load_text_corpus(path) -> list[str]:
    """Read a newline-delimited UTF-8 payload corpus, one payload per line."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines
