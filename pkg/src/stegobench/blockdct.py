"""8x8 block DCT helpers shared by the transform codec and the QIM embedder."""

from __future__ import annotations

import numpy as np

BLOCK = 8

# Zigzag scan: ZIGZAG_TO_RASTER[k] is the row-major index of the k-th
# coefficient in zigzag order (index 0 is DC).
ZIGZAG_TO_RASTER = np.array(
    [
        0,  1,  8, 16,  9,  2,  3, 10,
        17, 24, 32, 25, 18, 11,  4,  5,
        12, 19, 26, 33, 40, 48, 41, 34,
        27, 20, 13,  6,  7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36,
        29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46,
        53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.int64,
)


def _basis() -> np.ndarray:
    # Orthonormal DCT-II basis: C[k, n] = c_k cos((2n+1) k pi / 16)
    k = np.arange(BLOCK)[:, None].astype(np.float64)
    n = np.arange(BLOCK)[None, :].astype(np.float64)
    mat = np.cos((2.0 * n + 1.0) * k * np.pi / (2.0 * BLOCK))
    mat *= np.sqrt(2.0 / BLOCK)
    mat[0] = np.sqrt(1.0 / BLOCK)
    return mat


_C = _basis()
_C.flags.writeable = False


def dct_basis() -> np.ndarray:
    """The orthonormal 8-point DCT-II matrix (read-only view)."""
    return _C


def dct2(blocks: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT-II of stacked (..., 8, 8) blocks."""
    return np.einsum("ij,...jk,lk->...il", _C, blocks, _C, optimize=True)


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of `dct2`."""
    return np.einsum("ji,...jk,kl->...il", _C, coeffs, _C, optimize=True)


def pad_edge_multiple(plane: np.ndarray, multiple: int) -> np.ndarray:
    """Pad a 2D plane by edge replication so both dims divide `multiple`."""
    h, w = plane.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return plane
    return np.pad(plane, ((0, ph), (0, pw)), mode="edge")


def blockify(plane: np.ndarray) -> np.ndarray:
    """View a (H, W) plane with 8-divisible dims as (H/8, W/8, 8, 8) blocks."""
    h, w = plane.shape
    if h % BLOCK or w % BLOCK:
        raise ValueError(f"plane {h}x{w} not a multiple of {BLOCK}")
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def unblockify(blocks: np.ndarray) -> np.ndarray:
    """Inverse of `blockify`: (nby, nbx, 8, 8) back to (H, W)."""
    nby, nbx = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(nby * BLOCK, nbx * BLOCK)
