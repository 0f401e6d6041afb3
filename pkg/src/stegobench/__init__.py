"""Desk-scale toolkit for image steganography attack and defense evaluation.

The package is organized in layers: raster plumbing (`imagecore`), payload
conversion (`payloadcodec`), embedding methods (`stego`), lossy channel
simulation (`channel`), scoring (`metrics`), detectors (`steganalysis`), and
the experiment harness plus CLI on top (`harness`, `cli`).
"""

__version__ = "0.1.0"

from .imagecore import ImageBuffer, ImageF32, read_image, write_image
from .payloadcodec import BitString, bits_to_text, text_to_bits
from .stego import StegoConfig, capacity, embed, extract
from .channel import ChannelSpec, apply_channel, platform_preset

__all__ = [
    "ImageBuffer",
    "ImageF32",
    "read_image",
    "write_image",
    "BitString",
    "text_to_bits",
    "bits_to_text",
    "StegoConfig",
    "capacity",
    "embed",
    "extract",
    "ChannelSpec",
    "apply_channel",
    "platform_preset",
    "__version__",
]
