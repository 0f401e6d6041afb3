"""Fidelity, perceptual, payload-recovery, and detection metrics.

Image metrics treat X and Y as (H, W, C) 8-bit rasters with N = H*W*C
samples and dynamic range L = 255:

    MAE  = (1/N) sum |X_i - Y_i|
    PSNR = 10 log10(L^2 / MSE), +inf for identical images
    SSIM = mean over channels and 11x11 Gaussian windows (sigma 1.5) of
           ((2 mu_x mu_y + c1)(2 cov + c2)) /
           ((mu_x^2 + mu_y^2 + c1)(var_x + var_y + c2)),
           c1 = (0.01 L)^2, c2 = (0.03 L)^2

Text recovery uses exact match, character error rate (Levenshtein distance
over reference length, may exceed 1), and a bit error rate on the UTF-8
bitstrings where length mismatch counts as errors. Detector outputs are
scored with accuracy, F1 (positive class = stego), and a rank-based AUC with
ties counted one half.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.ndimage import correlate1d
from scipy.stats import rankdata

from .imagecore import ImageBuffer
from .payloadcodec import BitString, text_to_bits

L_RANGE = 255.0


class ShapeMismatchError(ValueError):
    """Inputs must have identical geometry."""


class TooSmallError(ValueError):
    """Image smaller than the metric's window."""


class WeightDimensionMismatchError(ValueError):
    """Perceptual weight vector does not match the extractor's channel count."""


class EmptyCorpusError(ValueError):
    """Corpus-level metric over zero items."""


class SingleClassError(ValueError):
    """Operation needs both cover and stego examples."""


def _check_same_shape(x: ImageBuffer, y: ImageBuffer) -> None:
    if x.pixels.shape != y.pixels.shape:
        raise ShapeMismatchError(f"shape {x.pixels.shape} vs {y.pixels.shape}")


# ---------------------------------------------------------------------------
# pixel fidelity


def pixel_fidelity(x: ImageBuffer, y: ImageBuffer) -> dict:
    """MAE and PSNR over all samples jointly. Identical inputs give psnr_db=inf."""
    _check_same_shape(x, y)
    dx = x.pixels.astype(np.float64) - y.pixels.astype(np.float64)
    mae = float(np.mean(np.abs(dx)))
    mse = float(np.mean(dx * dx))
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(L_RANGE * L_RANGE / mse)
    return {"mae": mae, "psnr_db": psnr}


# ---------------------------------------------------------------------------
# SSIM

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = (0.01 * L_RANGE) ** 2
_SSIM_C2 = (0.03 * L_RANGE) ** 2


def _ssim_taps() -> np.ndarray:
    radius = (_SSIM_WINDOW - 1) // 2
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * _SSIM_SIGMA * _SSIM_SIGMA))
    return w / w.sum()


def _window_means(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # Separable weighted means; interior crop removes all boundary effects,
    # leaving exact full-window statistics.
    pad = (_SSIM_WINDOW - 1) // 2
    out = correlate1d(plane, taps, axis=0, mode="reflect")
    out = correlate1d(out, taps, axis=1, mode="reflect")
    return out[pad:-pad, pad:-pad]


def ssim(x: ImageBuffer, y: ImageBuffer) -> float:
    """Mean structural similarity over all full 11x11 windows and channels."""
    _check_same_shape(x, y)
    if x.height < _SSIM_WINDOW or x.width < _SSIM_WINDOW:
        raise TooSmallError(
            f"ssim needs at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, got {x.height}x{x.width}"
        )
    taps = _ssim_taps()
    vals = []
    for c in range(x.channels):
        a = x.pixels[:, :, c].astype(np.float64)
        b = y.pixels[:, :, c].astype(np.float64)
        mu_a = _window_means(a, taps)
        mu_b = _window_means(b, taps)
        e_aa = _window_means(a * a, taps)
        e_bb = _window_means(b * b, taps)
        e_ab = _window_means(a * b, taps)
        var_a = e_aa - mu_a * mu_a
        var_b = e_bb - mu_b * mu_b
        cov = e_ab - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
        den = (mu_a * mu_a + mu_b * mu_b + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# learned-feature perceptual distance (pluggable extractor)


@dataclass
class LpipsModel:
    """Feature extractor plus per-layer channel weights.

    `extractor` maps an ImageBuffer to a list of (H_l, W_l, C_l) float maps.
    The distance unit-normalizes each spatial feature vector across channels,
    weights the difference channel-wise, and averages squared norms:

        d = sum_l (1 / (H_l W_l)) sum_hw || w_l . (f1_hw - f2_hw) ||^2
    """

    extractor: Callable[[ImageBuffer], list]
    weights: list
    name: str = "custom"


def lpips(x: ImageBuffer, y: ImageBuffer, model: LpipsModel) -> float:
    _check_same_shape(x, y)
    feats_x = model.extractor(x)
    feats_y = model.extractor(y)
    if len(feats_x) != len(model.weights):
        raise WeightDimensionMismatchError(
            f"{len(feats_x)} layers vs {len(model.weights)} weight vectors"
        )
    total = 0.0
    for fx, fy, w in zip(feats_x, feats_y, model.weights):
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != fx.shape[2]:
            raise WeightDimensionMismatchError(
                f"weight length {w.shape} vs {fx.shape[2]} channels"
            )
        if np.any(w < 0):
            raise WeightDimensionMismatchError("weights must be nonnegative")
        nx = _unit_normalize(fx)
        ny = _unit_normalize(fy)
        d = (nx - ny) * w[np.newaxis, np.newaxis, :]
        total += float(np.mean(np.sum(d * d, axis=2)))
    return total


def _unit_normalize(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    norm = np.sqrt(np.sum(f * f, axis=2, keepdims=True))
    safe = np.where(norm == 0.0, 1.0, norm)
    return np.where(norm > 0.0, f / safe, 0.0)


def pyramid_extractor(img: ImageBuffer) -> list:
    """Default deterministic extractor: a 3-level box pyramid of raw samples.

    A stand-in with the right interface so perceptual distances are exercised
    end to end; swap in a trained network extractor for research-grade
    numbers.
    """
    x = img.pixels.astype(np.float64) / 255.0
    feats = [x]
    for _ in range(2):
        x = _box_down2_hwc(x)
        feats.append(x)
    return feats


def _box_down2_hwc(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    ph, pw = h % 2, w % 2
    if ph or pw:
        x = np.pad(x, ((0, ph), (0, pw), (0, 0)), mode="edge")
    h, w, _ = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))


def default_lpips_model(channels: int) -> LpipsModel:
    """Pyramid extractor with unit weights for `channels`-channel input."""
    ones = np.ones(channels, dtype=np.float64)
    return LpipsModel(extractor=pyramid_extractor, weights=[ones, ones, ones], name="pixel-pyramid")


def save_lpips_weights(weights: list, path, name: str = "custom") -> None:
    payload = {
        "name": name,
        "layers": [
            {"channels": int(np.asarray(w).shape[0]), "weights": [float(v) for v in np.asarray(w)]}
            for w in weights
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_lpips_weights(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    weights = []
    for layer in doc["layers"]:
        w = np.asarray(layer["weights"], dtype=np.float64)
        if w.shape[0] != int(layer["channels"]):
            raise WeightDimensionMismatchError(
                f"layer declares {layer['channels']} channels but has {w.shape[0]} weights"
            )
        weights.append(w)
    return weights


# ---------------------------------------------------------------------------
# text recovery


def levenshtein(a: str, b: str) -> int:
    """Edit distance over Unicode code points (insert/delete/substitute, unit cost)."""
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    codes = np.array([ord(ch) for ch in b], dtype=np.int64)
    idx = np.arange(lb + 1, dtype=np.int64)
    prev = idx.copy()
    cur = np.empty(lb + 1, dtype=np.int64)
    for i, ch in enumerate(a, start=1):
        cur[0] = i
        sub = prev[:-1] + (codes != ord(ch))
        np.minimum(sub, prev[1:] + 1, out=cur[1:])
        # propagate insertions left to right: cur[j] = min_k<=j (cur[k] + j - k)
        cur = np.minimum.accumulate(cur - idx) + idx
        prev, cur = cur, prev
    return int(prev[lb])


def bitstring_error_rate(sent: BitString, received: BitString) -> float:
    """Mismatches over the common prefix plus the length difference, over max length.

    Empty vs empty is 0 by convention.
    """
    ls, lr = len(sent), len(received)
    if ls == 0 and lr == 0:
        return 0.0
    m = min(ls, lr)
    mismatches = int(np.count_nonzero(sent.bits[:m] != received.bits[:m]))
    return (mismatches + abs(ls - lr)) / max(ls, lr)


def text_recovery(sent: str, received: str) -> dict:
    """Exact match flag, character error rate, and UTF-8 bit error rate."""
    cer = levenshtein(sent, received) / max(len(sent), 1)
    ber = bitstring_error_rate(text_to_bits(sent), text_to_bits(received))
    return {"emr_match": sent == received, "cer": cer, "ber": ber}


def corpus_text_metrics(pairs) -> dict:
    """Mean EMR/CER/BER over (sent, received) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpusError("no text pairs to score")
    rows = [text_recovery(s, r) for s, r in pairs]
    return {
        "emr": float(np.mean([1.0 if r["emr_match"] else 0.0 for r in rows])),
        "cer": float(np.mean([r["cer"] for r in rows])),
        "ber": float(np.mean([r["ber"] for r in rows])),
    }


# ---------------------------------------------------------------------------
# detection metrics


@dataclass(frozen=True, eq=False)
class DetectionScores:
    """Detector outputs: labels (0 cover, 1 stego), real scores, decision threshold."""

    labels: np.ndarray
    scores: np.ndarray
    threshold: float

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if labels.shape != scores.shape:
            raise ShapeMismatchError(f"{labels.shape} labels vs {scores.shape} scores")
        if labels.size == 0:
            raise EmptyCorpusError("no detection scores")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        labels.flags.writeable = False
        scores.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)


def detection_metrics(scores: DetectionScores) -> dict:
    """Accuracy, F1 (positive = stego, prediction = score >= threshold), AUC.

    AUC uses the rank statistic with ties counted one half; with only one
    class present it is reported as None rather than a number.
    """
    labels = scores.labels
    preds = scores.scores >= scores.threshold
    tp = int(np.count_nonzero(preds & (labels == 1)))
    fp = int(np.count_nonzero(preds & (labels == 0)))
    fn = int(np.count_nonzero(~preds & (labels == 1)))
    tn = int(np.count_nonzero(~preds & (labels == 0)))
    accuracy = (tp + tn) / labels.size
    f1 = (2.0 * tp / (2.0 * tp + fp + fn)) if (2 * tp + fp + fn) > 0 else 0.0
    return {
        "accuracy": float(accuracy),
        "f1": float(f1),
        "auc": auc_score(labels, scores.scores),
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "tn": tn,
    }


def auc_score(labels: np.ndarray, scores: np.ndarray):
    """Rank-based AUC (probability a stego outranks a cover, ties = 1/2).

    Returns None when only one class is present.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    n1 = int(np.count_nonzero(labels == 1))
    n0 = labels.size - n1
    if n0 == 0 or n1 == 0:
        return None
    ranks = rankdata(scores)
    pos_ranks = float(ranks[labels == 1].sum())
    return float((pos_ranks - n1 * (n1 + 1) / 2.0) / (n0 * n1))
