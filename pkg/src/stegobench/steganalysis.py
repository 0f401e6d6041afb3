"""Residual-histogram features and an FLD subspace-ensemble detector.

Features are computed on luminance only: five residual filters (first- and
second-order differences in both directions plus a 5x5 predictor kernel),
each quantized at q=1 and truncated to [-2, 2], summarized by a normalized
marginal histogram (5 bins) and horizontal/vertical co-occurrence histograms
(25 bins each). The detector averages signed projections of Fisher linear
discriminants fit on seed-derived random feature subspaces; its decision
threshold is tuned for F1 on a held-out fifth of the training pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import correlate2d

from .imagecore import ImageBuffer, luma_plane, round_half_away
from .metrics import DetectionScores, detection_metrics

SCHEMA_ID = "resid5-q1t2-cooc-v1"

_Q = 1.0
_T = 2

# 5x5 predictor: residual = neighborhood prediction minus 12x the center,
# normalized by 12.
KV_KERNEL = (
    np.array(
        [
            [-1, 2, -2, 2, -1],
            [2, -6, 8, -6, 2],
            [-2, 8, -12, 8, -2],
            [2, -6, 8, -6, 2],
            [-1, 2, -2, 2, -1],
        ],
        dtype=np.float64,
    )
    / 12.0
)
KV_KERNEL.flags.writeable = False

RESIDUAL_ORDER = ("d1h", "d1v", "d2h", "d2v", "kv")

FEATURE_LENGTH = len(RESIDUAL_ORDER) * (5 + 25 + 25)

_KEY_MASK = 0xFFFFFFFFFFFFFFFF


class FeatureTooSmallError(ValueError):
    """Image below the 8x8 minimum for residual features."""


class SchemaMismatchError(ValueError):
    """Feature schema does not match the model's schema."""


class DegenerateScatterError(ValueError):
    """Within-class scatter is identically zero; no discriminant exists."""


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema_id: str = SCHEMA_ID

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).reshape(-1))
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def residual_maps(y: np.ndarray) -> dict:
    """The five raw (unquantized) residual planes of a float luminance plane."""
    y = np.asarray(y, dtype=np.float64)
    return {
        "d1h": y[:, 1:] - y[:, :-1],
        "d1v": y[1:, :] - y[:-1, :],
        "d2h": y[:, :-2] - 2.0 * y[:, 1:-1] + y[:, 2:],
        "d2v": y[:-2, :] - 2.0 * y[1:-1, :] + y[2:, :],
        "kv": correlate2d(y, KV_KERNEL, mode="valid"),
    }


def _quantize_truncate(r: np.ndarray) -> np.ndarray:
    q = round_half_away(r / _Q)
    return np.clip(q, -_T, _T).astype(np.int64)


def _histogram_block(qr: np.ndarray) -> np.ndarray:
    bins = 2 * _T + 1
    marginal = np.bincount((qr + _T).reshape(-1), minlength=bins).astype(np.float64)
    marginal /= marginal.sum()
    pairs_h = (qr[:, :-1] + _T) * bins + (qr[:, 1:] + _T)
    cooc_h = np.bincount(pairs_h.reshape(-1), minlength=bins * bins).astype(np.float64)
    cooc_h /= cooc_h.sum()
    pairs_v = (qr[:-1, :] + _T) * bins + (qr[1:, :] + _T)
    cooc_v = np.bincount(pairs_v.reshape(-1), minlength=bins * bins).astype(np.float64)
    cooc_v /= cooc_v.sum()
    return np.concatenate([marginal, cooc_h, cooc_v])


def residual_features(img: ImageBuffer) -> FeatureVector:
    """275-dim residual histogram features of the luminance plane.

    Invariant to a constant brightness shift (differences cancel it) as long
    as no samples clip.
    """
    if img.height < 8 or img.width < 8:
        raise FeatureTooSmallError(f"need at least 8x8, got {img.height}x{img.width}")
    y = luma_plane(img)
    blocks = [
        _histogram_block(_quantize_truncate(residual_maps(y)[name]))
        for name in RESIDUAL_ORDER
    ]
    return FeatureVector(np.concatenate(blocks))


# ---------------------------------------------------------------------------
# FLD subspace ensemble


@dataclass(frozen=True, eq=False)
class BaseLearner:
    subspace: np.ndarray  # sorted feature indices
    direction: np.ndarray  # unit-norm discriminant in subspace coordinates
    bias: float

    def __post_init__(self):
        sub = np.ascontiguousarray(np.asarray(self.subspace, dtype=np.int64))
        dirv = np.ascontiguousarray(np.asarray(self.direction, dtype=np.float64))
        sub.flags.writeable = False
        dirv.flags.writeable = False
        object.__setattr__(self, "subspace", sub)
        object.__setattr__(self, "direction", dirv)


@dataclass(frozen=True)
class DetectorModel:
    schema_id: str
    learners: tuple
    threshold: float
    train_manifest: dict


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _KEY_MASK))


def _fit_fld(x0: np.ndarray, x1: np.ndarray):
    mu0 = x0.mean(axis=0)
    mu1 = x1.mean(axis=0)
    d0 = x0 - mu0
    d1 = x1 - mu1
    sw = d0.T @ d0 + d1.T @ d1
    dim = sw.shape[0]
    trace = float(np.trace(sw))
    if trace <= 0.0:
        raise DegenerateScatterError("within-class scatter is zero")
    sw = sw + (1e-4 * trace / dim) * np.eye(dim)
    w = np.linalg.solve(sw, mu1 - mu0)
    norm = float(np.linalg.norm(w))
    if norm > 0.0:
        w = w / norm
    bias = float(w @ (mu0 + mu1) / 2.0)
    return w, bias


def _ensemble_scores(learners, x: np.ndarray) -> np.ndarray:
    total = np.zeros(x.shape[0], dtype=np.float64)
    for lrn in learners:
        total += x[:, lrn.subspace] @ lrn.direction - lrn.bias
    return total / len(learners)


def _best_f1_threshold(labels: np.ndarray, scores: np.ndarray) -> float:
    best_t, best_f1 = 0.0, -1.0
    for t in np.unique(scores):
        preds = scores >= t
        tp = int(np.count_nonzero(preds & (labels == 1)))
        fp = int(np.count_nonzero(preds & (labels == 0)))
        fn = int(np.count_nonzero(~preds & (labels == 1)))
        f1 = (2.0 * tp / (2.0 * tp + fp + fn)) if (2 * tp + fp + fn) > 0 else 0.0
        if f1 > best_f1:
            best_f1, best_t = f1, float(t)
    return best_t


def fit_ensemble(
    x_cover: np.ndarray,
    x_stego: np.ndarray,
    seed: int = 0,
    n_learners: int = 51,
    subspace_dim=None,
    manifest=None,
) -> DetectorModel:
    """Fit the FLD subspace ensemble on raw feature matrices.

    A fifth of each class (at least one item) is held out for threshold
    tuning; the learners are fit on the remainder. Fully deterministic for a
    fixed seed.
    """
    x0 = np.asarray(x_cover, dtype=np.float64)
    x1 = np.asarray(x_stego, dtype=np.float64)
    if x0.ndim != 2 or x1.ndim != 2 or x0.shape[1] != x1.shape[1]:
        raise ValueError(f"bad feature matrices {x0.shape} / {x1.shape}")
    if x0.shape[0] < 2 or x1.shape[0] < 2:
        raise ValueError("need at least two examples per class")
    dim = x0.shape[1]
    if subspace_dim is None:
        subspace_dim = min(dim, max(8, dim // 8))
    if not (1 <= subspace_dim <= dim):
        raise ValueError(f"subspace_dim must be in [1, {dim}], got {subspace_dim}")
    if n_learners < 1:
        raise ValueError(f"n_learners must be >= 1, got {n_learners}")

    rng = _rng(seed)
    val0 = max(1, x0.shape[0] // 5)
    val1 = max(1, x1.shape[0] // 5)
    perm0 = rng.permutation(x0.shape[0])
    perm1 = rng.permutation(x1.shape[0])
    fit0, hold0 = x0[perm0[val0:]], x0[perm0[:val0]]
    fit1, hold1 = x1[perm1[val1:]], x1[perm1[:val1]]

    learners = []
    for _ in range(n_learners):
        subspace = np.sort(rng.choice(dim, size=subspace_dim, replace=False))
        w, bias = _fit_fld(fit0[:, subspace], fit1[:, subspace])
        learners.append(BaseLearner(subspace=subspace, direction=w, bias=bias))
    learners = tuple(learners)

    val_x = np.vstack([hold0, hold1])
    val_y = np.concatenate([np.zeros(hold0.shape[0], dtype=np.int64), np.ones(hold1.shape[0], dtype=np.int64)])
    threshold = _best_f1_threshold(val_y, _ensemble_scores(learners, val_x))

    info = {
        "n_cover": int(x0.shape[0]),
        "n_stego": int(x1.shape[0]),
        "seed": int(seed),
        "n_learners": int(n_learners),
        "subspace_dim": int(subspace_dim),
    }
    if manifest:
        info.update(manifest)
    return DetectorModel(
        schema_id=SCHEMA_ID, learners=learners, threshold=float(threshold), train_manifest=info
    )


def train_detector(
    covers,
    stegos,
    seed: int = 0,
    n_learners: int = 51,
    subspace_dim=None,
    manifest=None,
) -> DetectorModel:
    """Extract residual features from both image sets and fit the ensemble."""
    x0 = np.vstack([residual_features(img).values for img in covers])
    x1 = np.vstack([residual_features(img).values for img in stegos])
    return fit_ensemble(
        x0, x1, seed=seed, n_learners=n_learners, subspace_dim=subspace_dim, manifest=manifest
    )


def score_features(model: DetectorModel, fv: FeatureVector) -> float:
    if fv.schema_id != model.schema_id:
        raise SchemaMismatchError(f"features {fv.schema_id!r} vs model {model.schema_id!r}")
    return float(_ensemble_scores(model.learners, fv.values[np.newaxis, :])[0])


def score_image(model: DetectorModel, img: ImageBuffer) -> float:
    """Ensemble score for one image; above threshold means 'stego'."""
    return score_features(model, residual_features(img))


def evaluate_detector(model: DetectorModel, covers, stegos):
    """Score both sets and return (DetectionScores, metrics dict)."""
    covers = list(covers)
    stegos = list(stegos)
    scores = np.array(
        [score_image(model, img) for img in covers] + [score_image(model, img) for img in stegos],
        dtype=np.float64,
    )
    labels = np.concatenate(
        [np.zeros(len(covers), dtype=np.int64), np.ones(len(stegos), dtype=np.int64)]
    )
    ds = DetectionScores(labels=labels, scores=scores, threshold=model.threshold)
    return ds, detection_metrics(ds)


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(model: DetectorModel) -> dict:
    return {
        "version": 1,
        "schema_id": model.schema_id,
        "threshold": model.threshold,
        "train_manifest": model.train_manifest,
        "learners": [
            {
                "subspace": [int(i) for i in lrn.subspace],
                "direction": [float(v) for v in lrn.direction],
                "bias": float(lrn.bias),
            }
            for lrn in model.learners
        ],
    }


def model_from_dict(d: dict) -> DetectorModel:
    learners = tuple(
        BaseLearner(
            subspace=np.asarray(ld["subspace"], dtype=np.int64),
            direction=np.asarray(ld["direction"], dtype=np.float64),
            bias=float(ld["bias"]),
        )
        for ld in d["learners"]
    )
    return DetectorModel(
        schema_id=str(d["schema_id"]),
        learners=learners,
        threshold=float(d["threshold"]),
        train_manifest=dict(d.get("train_manifest", {})),
    )


def save_model(model: DetectorModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> DetectorModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
