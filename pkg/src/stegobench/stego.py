"""Embedding methods: LSB replacement, LSB matching, and DCT-domain QIM.

All methods share one config type and the embed/extract/capacity interface.
Extraction needs the config (including the key) and the payload length;
lengths are carried out of band by the harness. The LSB family writes to the
k lowest bit planes in a key-seeded pseudorandom sample order. QIM snaps
selected mid-frequency luminance DCT coefficients onto one of two interleaved
lattices (offset 0 for a 0 bit, delta/2 for a 1 bit), which survives
quantization noise smaller than delta/4 per coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockdct import BLOCK, ZIGZAG_TO_RASTER, blockify, dct2, dct_basis, idct2, unblockify
from .channel import ChannelSpec, apply_channel
from .imagecore import (
    GRAY,
    YCBCR,
    ImageBuffer,
    ImageF32,
    WrongColorspaceError,
    quantize_u8,
    rgb_to_ycbcr,
    ycbcr_to_rgb,
)
from .metrics import bitstring_error_rate, pixel_fidelity
from .payloadcodec import BitString, repetition_decode, repetition_encode

LSB_REPLACE = "lsb-replace"
LSB_MATCH = "lsb-match"
DCT_QIM = "dct-qim"

METHODS = (LSB_REPLACE, LSB_MATCH, DCT_QIM)

# Low-frequency AC coefficients in zigzag order; DC excluded, high
# frequencies excluded because aggressive quantization wipes them out.
DEFAULT_BAND = (1, 2, 3, 4, 5, 6, 7, 8)

_KEY_MASK = 0xFFFFFFFFFFFFFFFF


class PayloadTooLargeError(ValueError):
    """Payload exceeds the capacity of this cover under this config."""


class UnknownMethodError(ValueError):
    """Config names a method this module does not implement."""


@dataclass(frozen=True)
class StegoConfig:
    """Parameters for one embedding method.

    k_planes applies to the LSB family (lsb-match is defined for the lowest
    plane only); delta, band, and repetition apply to dct-qim. key seeds the
    visitation order for every method.
    """

    method: str
    k_planes: int = 1
    delta: float = 12.0
    band: tuple = DEFAULT_BAND
    repetition: int = 1
    key: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise UnknownMethodError(f"unknown method {self.method!r} (known: {METHODS})")
        if not (1 <= int(self.k_planes) <= 8):
            raise ValueError(f"k_planes must be in [1, 8], got {self.k_planes}")
        if self.method == LSB_MATCH and self.k_planes != 1:
            raise ValueError("lsb-match embeds one bit per sample; k_planes must be 1")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.repetition < 1 or self.repetition % 2 == 0:
            raise ValueError(f"repetition must be odd and >= 1, got {self.repetition}")
        band = tuple(int(i) for i in self.band)
        if self.method == DCT_QIM:
            if not band:
                raise ValueError("dct-qim needs a nonempty coefficient band")
            if any(i < 1 or i > 63 for i in band):
                raise ValueError(f"band indices must be AC positions in [1, 63], got {band}")
            if len(set(band)) != len(band):
                raise ValueError(f"band has duplicate indices: {band}")
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "key", int(self.key) & _KEY_MASK)


@dataclass(frozen=True)
class EmbedResult:
    stego: ImageBuffer
    bits: BitString
    capacity_bits: int


def _rng(key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(key & _KEY_MASK))


def _check_cover(cover: ImageBuffer) -> None:
    if cover.colorspace == YCBCR:
        raise WrongColorspaceError("covers must be RGB or Gray")


def capacity(cover: ImageBuffer, cfg: StegoConfig) -> int:
    """Maximum payload bits this cover can hold under this config."""
    _check_cover(cover)
    if cfg.method in (LSB_REPLACE, LSB_MATCH):
        return cover.height * cover.width * cover.channels * cfg.k_planes
    n_blocks = (cover.height // BLOCK) * (cover.width // BLOCK)
    return (n_blocks * len(cfg.band)) // cfg.repetition


def embed(cover: ImageBuffer, payload: BitString, cfg: StegoConfig) -> EmbedResult:
    """Embed `payload` into `cover`; returns the stego image and bookkeeping.

    An empty payload returns the cover unchanged for every method.
    """
    _check_cover(cover)
    cap = capacity(cover, cfg)
    if len(payload) > cap:
        raise PayloadTooLargeError(
            f"payload of {len(payload)} bits exceeds capacity {cap} "
            f"({cfg.method} on {cover.height}x{cover.width}x{cover.channels})"
        )
    if len(payload) == 0:
        return EmbedResult(stego=cover, bits=payload, capacity_bits=cap)
    if cfg.method == LSB_REPLACE:
        stego = _embed_lsb_replace(cover, payload, cfg)
    elif cfg.method == LSB_MATCH:
        stego = _embed_lsb_match(cover, payload, cfg)
    else:
        stego = _embed_dct_qim(cover, payload, cfg)
    return EmbedResult(stego=stego, bits=payload, capacity_bits=cap)


def extract(stego: ImageBuffer, n_bits: int, cfg: StegoConfig) -> BitString:
    """Read back `n_bits` payload bits using the config's key and parameters."""
    _check_cover(stego)
    if n_bits < 0:
        raise ValueError(f"n_bits must be >= 0, got {n_bits}")
    cap = capacity(stego, cfg)
    if n_bits > cap:
        raise PayloadTooLargeError(f"requested {n_bits} bits, capacity is {cap}")
    if n_bits == 0:
        return BitString(np.zeros(0, dtype=np.uint8))
    if cfg.method in (LSB_REPLACE, LSB_MATCH):
        return _extract_lsb(stego, n_bits, cfg)
    return _extract_dct_qim(stego, n_bits, cfg)


# ---------------------------------------------------------------------------
# LSB family


def _lsb_order(cfg: StegoConfig, n_samples: int) -> np.ndarray:
    return _rng(cfg.key).permutation(n_samples)


def _embed_lsb_replace(cover: ImageBuffer, payload: BitString, cfg: StegoConfig) -> ImageBuffer:
    flat = cover.pixels.reshape(-1).copy()
    order = _lsb_order(cfg, flat.size)
    k = cfg.k_planes
    n = len(payload)
    n_samples = -(-n // k)  # ceil
    sel = order[:n_samples]
    for plane in range(k):
        pos = np.arange(n_samples) * k + plane
        valid = pos < n
        if not np.any(valid):
            break
        samples = sel[valid]
        bits = payload.bits[pos[valid]]
        keep = np.uint8(0xFF ^ (1 << plane))
        flat[samples] = (flat[samples] & keep) | (bits << np.uint8(plane))
    return ImageBuffer(flat.reshape(cover.pixels.shape), cover.colorspace)


def _embed_lsb_match(cover: ImageBuffer, payload: BitString, cfg: StegoConfig) -> ImageBuffer:
    rng = _rng(cfg.key)
    flat = cover.pixels.reshape(-1).copy()
    order = rng.permutation(flat.size)
    n = len(payload)
    directions = rng.integers(0, 2, size=n, dtype=np.int16)
    sel = order[:n]
    vals = flat[sel].astype(np.int16)
    step = np.where(directions == 1, 1, -1).astype(np.int16)
    # stay inside [0, 255]; a +-1 step always flips parity
    step = np.where(vals == 0, 1, step)
    step = np.where(vals == 255, -1, step)
    mismatch = (vals & 1) != payload.bits
    flat[sel] = (vals + np.where(mismatch, step, 0)).astype(np.uint8)
    return ImageBuffer(flat.reshape(cover.pixels.shape), cover.colorspace)


def _extract_lsb(stego: ImageBuffer, n_bits: int, cfg: StegoConfig) -> BitString:
    flat = stego.pixels.reshape(-1)
    order = _lsb_order(cfg, flat.size)
    k = cfg.k_planes if cfg.method == LSB_REPLACE else 1
    n_samples = -(-n_bits // k)
    vals = flat[order[:n_samples]]
    planes = [(vals >> np.uint8(p)) & np.uint8(1) for p in range(k)]
    bits = np.stack(planes, axis=1).reshape(-1)[:n_bits]
    return BitString(bits)


# ---------------------------------------------------------------------------
# DCT QIM


def qim_embed_value(c, bit, delta: float):
    """Snap coefficient(s) to the lattice for `bit`: delta*round((c-d)/delta)+d."""
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(bit, dtype=np.float64) * (delta / 2.0)
    shifted = (c - d) / delta
    snapped = np.sign(shifted) * np.floor(np.abs(shifted) + 0.5)
    return delta * snapped + d


def qim_decide_bit(c, delta: float):
    """Nearest-lattice decision; ties resolve to bit 0."""
    c = np.asarray(c, dtype=np.float64)
    d0 = np.abs(c - qim_embed_value(c, 0, delta))
    d1 = np.abs(c - qim_embed_value(c, 1, delta))
    return (d1 < d0).astype(np.uint8)


def _luma_decompose(img: ImageBuffer):
    """Split into a float64 luminance plane and a rebuild closure."""
    if img.colorspace == GRAY:
        def rebuild(y: np.ndarray) -> ImageBuffer:
            return ImageBuffer(quantize_u8(y)[:, :, np.newaxis], GRAY)

        return img.pixels[:, :, 0].astype(np.float64), rebuild

    ycc = rgb_to_ycbcr(img).samples.astype(np.float64)

    def rebuild(y: np.ndarray) -> ImageBuffer:
        out = np.stack([y, ycc[:, :, 1], ycc[:, :, 2]], axis=-1)
        return ycbcr_to_rgb(ImageF32(out.astype(np.float32), YCBCR))

    return ycc[:, :, 0].copy(), rebuild


def _qim_slots(cfg: StegoConfig, n_blocks: int, n_coded: int):
    band_cols = ZIGZAG_TO_RASTER[np.asarray(cfg.band, dtype=np.int64)]
    n_slots = n_blocks * len(cfg.band)
    order = _rng(cfg.key).permutation(n_slots)[:n_coded]
    block_idx = order // len(cfg.band)
    col_idx = band_cols[order % len(cfg.band)]
    return block_idx, col_idx


_COMP_ITERS = 8
_REPAIR_MARGIN = 0.45  # fraction of delta/2 a slot error may use after repair
_REPAIR_FLIPS = 96

_LUMA_W = np.array([0.299, 0.587, 0.114])


def _embed_dct_qim(cover: ImageBuffer, payload: BitString, cfg: StegoConfig) -> ImageBuffer:
    coded = repetition_encode(payload, cfg.repetition)
    y, rebuild = _luma_decompose(cover)
    nby, nbx = y.shape[0] // BLOCK, y.shape[1] // BLOCK
    region = y[: nby * BLOCK, : nbx * BLOCK]
    coeffs = dct2(blockify(region)).reshape(nby * nbx, BLOCK * BLOCK)
    block_idx, col_idx = _qim_slots(cfg, nby * nbx, len(coded))
    target = qim_embed_value(coeffs[block_idx, col_idx], coded.bits, cfg.delta)

    # Snapping alone does not survive 8-bit storage: rounding the inverse
    # transform perturbs a low-band coefficient by up to ~3.6, more than the
    # delta/4 decision margin at small deltas. Pre-compensate by measuring
    # what a decoder would see and nudging the written values, then repair
    # any block still outside its margin with integer pixel flips.
    want = target
    best = None
    out = y.copy()
    for it in range(_COMP_ITERS):
        coeffs[block_idx, col_idx] = want
        rec = unblockify(idct2(coeffs.reshape(nby, nbx, BLOCK, BLOCK)))
        out[: nby * BLOCK, : nbx * BLOCK] = rec
        stego = rebuild(out)
        y2, _ = _luma_decompose(stego)
        seen = dct2(blockify(y2[: nby * BLOCK, : nbx * BLOCK]))
        err = seen.reshape(nby * nbx, BLOCK * BLOCK)[block_idx, col_idx] - target
        worst = float(np.max(np.abs(err))) if err.size else 0.0
        if best is None or worst < best[0]:
            best = (worst, stego)
        if worst <= cfg.delta / 8.0:
            break
        # full steps first, damped later so oscillating slots settle
        want = want - (err if it < 3 else 0.5 * err)
    allowed = _REPAIR_MARGIN * (cfg.delta / 2.0)
    if best[0] > allowed:
        return _qim_repair(best[1], nbx, block_idx, col_idx, target, allowed)
    return best[1]


def _measured_luma(pixels: np.ndarray) -> np.ndarray:
    # what the extractor's decomposition computes from stored samples
    if pixels.shape[2] == 1:
        return pixels[:, :, 0].astype(np.float64)
    return (pixels.astype(np.float64) @ _LUMA_W).astype(np.float32).astype(np.float64)


def _qim_repair(stego, nbx, block_idx, col_idx, target, allowed) -> ImageBuffer:
    """Greedy unit pixel flips, block by block, until slots decode with margin.

    The compensation loop above iterates through a rounding step function and
    can limit-cycle; this fallback searches the integer pixel lattice
    directly. Each flip is the (pixel, channel, +-1) move that most reduces
    the block's worst slot error, capped at one step from the stored value.
    """
    pixels = np.array(stego.pixels)
    nch = pixels.shape[2]
    cbasis = dct_basis()
    nby = pixels.shape[0] // BLOCK

    y = _measured_luma(pixels)
    co = dct2(blockify(y[: nby * BLOCK, : nbx * BLOCK])).reshape(-1, BLOCK * BLOCK)
    errs = co[block_idx, col_idx] - target
    for b in np.unique(block_idx[np.abs(errs) > allowed]):
        sel = block_idx == b
        cols = col_idx[sel]
        basis = np.stack(
            [np.outer(cbasis[c // BLOCK], cbasis[c % BLOCK]) for c in cols]
        )  # (S, 8, 8): coefficient = sum(basis * luma block)
        by, bx = divmod(int(b), nbx)
        blk = pixels[by * BLOCK : (by + 1) * BLOCK, bx * BLOCK : (bx + 1) * BLOCK]
        base = blk.astype(np.int16).copy()
        err = np.einsum("sjk,jk->s", basis, _measured_luma(blk)) - target[sel]
        for _ in range(_REPAIR_FLIPS):
            worst = float(np.max(np.abs(err)))
            if worst <= allowed:
                break
            move = None
            for ch in range(nch):
                w = 1.0 if nch == 1 else float(_LUMA_W[ch])
                vals = blk[:, :, ch].astype(np.int16)
                for step in (1, -1):
                    cand = np.max(np.abs(err[:, None, None] + step * w * basis), axis=0)
                    moved = vals + step
                    bad = (moved < 0) | (moved > 255) | (np.abs(moved - base[:, :, ch]) > 1)
                    cand = np.where(bad, np.inf, cand)
                    j, k = np.unravel_index(int(np.argmin(cand)), cand.shape)
                    if move is None or cand[j, k] < move[0]:
                        move = (float(cand[j, k]), ch, step, j, k)
            if move is None or move[0] >= worst:
                break  # no strictly improving flip; keep the best reached
            _, ch, step, j, k = move
            w = 1.0 if nch == 1 else float(_LUMA_W[ch])
            blk[j, k, ch] = np.uint8(int(blk[j, k, ch]) + step)
            err = err + step * w * basis[:, j, k]
    return ImageBuffer(pixels, stego.colorspace)


def _extract_dct_qim(stego: ImageBuffer, n_bits: int, cfg: StegoConfig) -> BitString:
    y, _ = _luma_decompose(stego)
    nby, nbx = y.shape[0] // BLOCK, y.shape[1] // BLOCK
    region = y[: nby * BLOCK, : nbx * BLOCK]
    coeffs = dct2(blockify(region)).reshape(nby * nbx, BLOCK * BLOCK)
    n_coded = n_bits * cfg.repetition
    block_idx, col_idx = _qim_slots(cfg, nby * nbx, n_coded)
    bits = qim_decide_bit(coeffs[block_idx, col_idx], cfg.delta)
    return repetition_decode(BitString(bits), cfg.repetition)


# ---------------------------------------------------------------------------
# channel-adaptive calibration


@dataclass(frozen=True)
class CalibrationResult:
    """Winning config of a (delta, repetition) grid search plus the full table.

    best_effort is set when no candidate met the BER target and the returned
    config is simply the lowest-BER one.
    """

    config: StegoConfig
    mean_ber: float
    mean_psnr_db: float
    best_effort: bool
    table: tuple


def calibrate_robust(
    covers,
    payloads,
    channel: ChannelSpec,
    target_ber: float = 0.01,
    deltas=(6.0, 9.0, 12.0, 16.0),
    repetitions=(1, 3, 5),
    band=DEFAULT_BAND,
    key: int = 0,
) -> CalibrationResult:
    """Grid-search QIM (delta, repetition) against a channel.

    For each candidate, embeds into every cover (payloads cycled, truncated
    to capacity), pushes the stego through the channel, extracts, and records
    mean BER and mean cover/stego PSNR. Returns the candidate with the best
    PSNR among those meeting `target_ber`; if none qualifies, the lowest-BER
    candidate is returned with best_effort set. Ties resolve to grid order.
    """
    covers = list(covers)
    payloads = list(payloads)
    if not covers or not payloads:
        raise ValueError("calibration needs at least one cover and one payload")
    rows = []
    for delta in deltas:
        for rep in repetitions:
            cfg = StegoConfig(DCT_QIM, delta=float(delta), band=band, repetition=int(rep), key=key)
            bers, psnrs = [], []
            for i, cover in enumerate(covers):
                payload = payloads[i % len(payloads)]
                cap = capacity(cover, cfg)
                bits = payload[: min(len(payload), cap)]
                result = embed(cover, bits, cfg)
                psnrs.append(pixel_fidelity(cover, result.stego)["psnr_db"])
                arrived = apply_channel(result.stego, channel)
                recovered = extract(arrived, len(bits), cfg)
                bers.append(bitstring_error_rate(bits, recovered))
            rows.append(
                {
                    "delta": float(delta),
                    "repetition": int(rep),
                    "mean_ber": float(np.mean(bers)),
                    "mean_psnr_db": float(np.mean(psnrs)),
                }
            )
    feasible = [r for r in rows if r["mean_ber"] <= target_ber]
    if feasible:
        best = max(feasible, key=lambda r: r["mean_psnr_db"])
        best_effort = False
    else:
        best = min(rows, key=lambda r: r["mean_ber"])
        best_effort = True
    cfg = StegoConfig(
        DCT_QIM, delta=best["delta"], band=band, repetition=best["repetition"], key=key
    )
    return CalibrationResult(
        config=cfg,
        mean_ber=best["mean_ber"],
        mean_psnr_db=best["mean_psnr_db"],
        best_effort=best_effort,
        table=tuple(rows),
    )


# ---------------------------------------------------------------------------
# serialization


def stego_config_to_dict(cfg: StegoConfig) -> dict:
    return {
        "method": cfg.method,
        "k_planes": cfg.k_planes,
        "delta": cfg.delta,
        "band": list(cfg.band),
        "repetition": cfg.repetition,
        "key": cfg.key,
    }


def stego_config_from_dict(d: dict) -> StegoConfig:
    return StegoConfig(
        method=str(d["method"]),
        k_planes=int(d.get("k_planes", 1)),
        delta=float(d.get("delta", 12.0)),
        band=tuple(d.get("band", DEFAULT_BAND)),
        repetition=int(d.get("repetition", 1)),
        key=int(d.get("key", 0)),
    )
