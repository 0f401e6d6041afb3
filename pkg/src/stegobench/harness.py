"""Experiment harness: dataset splits, task runners, and report emission.

Determinism contract: every run is a pure function of (config, seed). The
per-item base seed is ``master_seed XOR item_index``; covers are synthesized
from it directly, payload generators use it XOR a fixed tag, and the per-item
stego key is ``config key XOR base seed``. Work may be spread over a thread
pool bounded by the SB_THREADS environment variable, but results are reduced
in item order, so thread count never changes any reported number.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelSpec, apply_channel, channel_from_dict, channel_to_dict, platform_preset
from .imagecore import ImageBuffer, read_image
from .metrics import (
    bitstring_error_rate,
    default_lpips_model,
    lpips,
    pixel_fidelity,
    ssim,
    text_recovery,
)
from .payloadcodec import (
    BitString,
    bits_to_image,
    bits_to_text,
    image_to_bits,
    load_text_corpus,
    random_bits,
    text_to_bits,
)
from .stego import (
    StegoConfig,
    calibrate_robust,
    capacity,
    embed,
    extract,
    stego_config_from_dict,
    stego_config_to_dict,
)
from .steganalysis import (
    evaluate_detector,
    model_to_dict,
    residual_features,
    score_image,
    train_detector,
)
from .synthetic import synth_cover, synth_secret_image, synth_text

_KEY_MASK = 0xFFFFFFFFFFFFFFFF
_PAYLOAD_TAG = 0xA5A5A5A5A5A5A5A5

TASKS = ("capability", "detection", "transfer", "robustness", "efficiency")


class ConfigError(ValueError):
    """Bad or inconsistent experiment configuration."""


class TooFewImagesError(ValueError):
    """Dataset too small to split."""


# ---------------------------------------------------------------------------
# work pool


def sb_threads() -> int:
    """Worker count from SB_THREADS; defaults to serial execution."""
    raw = os.environ.get("SB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Map preserving item order; thread count must never affect results."""
    items = list(items)
    n = sb_threads()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# dataset manifests


@dataclass(frozen=True)
class DatasetManifest:
    """Image paths with a seeded train/val/test assignment (7:1:2)."""

    name: str
    seed: int
    entries: tuple  # ((path, split), ...) in input order

    def paths(self, split: str) -> list:
        return [p for p, s in self.entries if s == split]

    @property
    def train(self) -> list:
        return self.paths("train")

    @property
    def val(self) -> list:
        return self.paths("val")

    @property
    def test(self) -> list:
        return self.paths("test")


def split_dataset(paths, seed: int, name: str = "dataset") -> DatasetManifest:
    """Assign each path to train/val/test at 7:1:2 with a seeded shuffle."""
    paths = [str(p) for p in paths]
    n = len(paths)
    if n < 10:
        raise TooFewImagesError(f"need at least 10 images to split, got {n}")
    n_train = int(0.7 * n + 0.5)
    n_val = int(0.1 * n + 0.5)
    order = np.random.Generator(np.random.PCG64(seed & _KEY_MASK)).permutation(n)
    labels = np.empty(n, dtype=object)
    labels[order[:n_train]] = "train"
    labels[order[n_train : n_train + n_val]] = "val"
    labels[order[n_train + n_val :]] = "test"
    entries = tuple((p, str(s)) for p, s in zip(paths, labels))
    return DatasetManifest(name=name, seed=int(seed), entries=entries)


# ---------------------------------------------------------------------------
# config parsing


def _parse_stego(config: dict) -> StegoConfig:
    raw = config.get("stego")
    if not isinstance(raw, dict):
        raise ConfigError("config needs a 'stego' object")
    try:
        return stego_config_from_dict(raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad stego config: {exc}") from exc


def _parse_channel(config: dict):
    raw = config.get("channel")
    if raw is None:
        return None
    try:
        if isinstance(raw, str):
            return platform_preset(raw)
        if isinstance(raw, dict):
            return channel_from_dict(raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad channel config: {exc}") from exc
    raise ConfigError(f"channel must be a preset name or spec object, got {type(raw)}")


def _channel_echo(chan) -> dict:
    return channel_to_dict(chan) if chan is not None else None


@dataclass(frozen=True)
class CoverItem:
    index: int  # global item index, drives all per-item seeds
    item_id: str
    split: str
    image: ImageBuffer


def _resolve_covers(config: dict, master_seed: int) -> list:
    """Materialize the cover source as a list of CoverItem.

    Synthetic sources take either a flat "count" or per-split counts
    ("train"/"val"/"test"); directory sources are split 7:1:2. Items carry a
    global index that all per-item randomness is derived from.
    """
    source = config.get("covers")
    if not isinstance(source, dict) or "kind" not in source:
        raise ConfigError("config needs a 'covers' object with a 'kind'")
    kind = source["kind"]
    if kind == "synthetic":
        width = int(source.get("width", 256))
        height = int(source.get("height", 256))
        channels = int(source.get("channels", 1))
        if "count" in source:
            counts = [("test", int(source["count"]))]
        else:
            counts = [
                ("train", int(source.get("train", 200))),
                ("val", int(source.get("val", 40))),
                ("test", int(source.get("test", 80))),
            ]
        items = []
        index = 0
        for split, count in counts:
            if count < 0:
                raise ConfigError(f"negative cover count for split {split}")
            for _ in range(count):
                seed = (master_seed ^ index) & _KEY_MASK
                items.append(
                    CoverItem(
                        index=index,
                        item_id=f"syn-{index:05d}",
                        split=split,
                        image=synth_cover(seed, width, height, channels),
                    )
                )
                index += 1
        return items
    if kind == "dir":
        root = Path(source.get("path", "."))
        pattern = source.get("pattern", "*.png")
        paths = sorted(str(p) for p in root.glob(pattern))
        if not paths:
            raise ConfigError(f"no images matching {pattern!r} under {root}")
        manifest = split_dataset(paths, master_seed, name=str(root))
        return [
            CoverItem(index=i, item_id=Path(p).name, split=s, image=read_image(p))
            for i, (p, s) in enumerate(manifest.entries)
        ]
    raise ConfigError(f"unknown cover source kind {kind!r}")


@dataclass(frozen=True)
class PayloadItem:
    kind: str  # text | image | bits
    bits: BitString
    text: str = ""
    secret: ImageBuffer = None


def _payload_for_item(pconfig: dict, item: CoverItem, master_seed: int, corpus) -> PayloadItem:
    seed = ((master_seed ^ item.index) ^ _PAYLOAD_TAG) & _KEY_MASK
    kind = pconfig.get("kind", "synthetic-text")
    if kind == "synthetic-text":
        text = synth_text(
            seed,
            int(pconfig.get("min_chars", 48)),
            int(pconfig.get("max_chars", 96)),
        )
        return PayloadItem(kind="text", bits=text_to_bits(text), text=text)
    if kind == "text-file":
        text = corpus[item.index % len(corpus)]
        return PayloadItem(kind="text", bits=text_to_bits(text), text=text)
    if kind == "synthetic-image":
        ratio = float(pconfig.get("ratio", 0.25))
        if not (0.0 < ratio <= 1.0):
            raise ConfigError(f"payload ratio must be in (0, 1], got {ratio}")
        sw = max(1, int(round(ratio * item.image.width)))
        sh = max(1, int(round(ratio * item.image.height)))
        channels = int(pconfig.get("channels", 3))
        secret = synth_secret_image(seed, sw, sh, channels)
        return PayloadItem(kind="image", bits=image_to_bits(secret), secret=secret)
    if kind == "random-bits":
        if "bpp" in pconfig:
            n = int(round(float(pconfig["bpp"]) * item.image.width * item.image.height))
        else:
            n = int(pconfig.get("bits", 4096))
        return PayloadItem(kind="bits", bits=random_bits(n, seed))
    raise ConfigError(f"unknown payload kind {kind!r}")


def _load_corpus(pconfig: dict):
    if pconfig.get("kind") == "text-file":
        corpus = load_text_corpus(pconfig["path"])
        if not corpus:
            raise ConfigError(f"empty payload corpus {pconfig['path']}")
        return corpus
    return None


def _item_stego_config(base: StegoConfig, item: CoverItem, master_seed: int) -> StegoConfig:
    return replace(base, key=(base.key ^ ((master_seed ^ item.index) & _KEY_MASK)) & _KEY_MASK)


# ---------------------------------------------------------------------------
# capability core (shared by capability, robustness, transfer-attack)


def _capability_item(item, pconfig, corpus, base_cfg, chan, master_seed, lpips_cache):
    payload = _payload_for_item(pconfig, item, master_seed, corpus)
    cfg = _item_stego_config(base_cfg, item, master_seed)
    cap = capacity(item.image, cfg)
    if len(payload.bits) > cap:
        raise ConfigError(
            f"payload of {len(payload.bits)} bits exceeds capacity {cap} on {item.item_id}"
        )
    t0 = time.perf_counter()
    result = embed(item.image, payload.bits, cfg)
    t_embed = time.perf_counter() - t0

    fid = pixel_fidelity(item.image, result.stego)
    model = lpips_cache.setdefault(item.image.channels, default_lpips_model(item.image.channels))
    row = {
        "item": item.item_id,
        "bits": len(payload.bits),
        "bpp": len(payload.bits) / (item.image.width * item.image.height),
        "mae": fid["mae"],
        "psnr_db": fid["psnr_db"],
        "ssim": ssim(item.image, result.stego),
        "lpips": lpips(item.image, result.stego, model),
    }

    arrived = apply_channel(result.stego, chan) if chan is not None else result.stego
    t1 = time.perf_counter()
    recovered = extract(arrived, len(payload.bits), cfg)
    t_extract = time.perf_counter() - t1

    if payload.kind == "text":
        rec_text = bits_to_text(recovered)
        scores = text_recovery(payload.text, rec_text)
        row["emr"] = 1.0 if scores["emr_match"] else 0.0
        row["cer"] = scores["cer"]
        row["ber"] = scores["ber"]
    elif payload.kind == "bits":
        row["emr"] = 1.0 if payload.bits == recovered else 0.0
        row["ber"] = bitstring_error_rate(payload.bits, recovered)
    else:  # image payload
        row["ber"] = bitstring_error_rate(payload.bits, recovered)
        rec_img = bits_to_image(
            recovered, payload.secret.width, payload.secret.height, payload.secret.channels
        )
        sfid = pixel_fidelity(payload.secret, rec_img)
        row["secret_mae"] = sfid["mae"]
        row["secret_psnr_db"] = sfid["psnr_db"]

    return row, {"embed_s": t_embed, "extract_s": t_extract}


def _capability_core(config: dict, master_seed: int, chan) -> dict:
    items = _resolve_covers(config, master_seed)
    pconfig = config.get("payload", {"kind": "synthetic-text"})
    corpus = _load_corpus(pconfig)
    base_cfg = _parse_stego(config)
    lpips_cache: dict = {}

    outs = parallel_map(
        lambda it: _capability_item(it, pconfig, corpus, base_cfg, chan, master_seed, lpips_cache),
        items,
    )
    rows = [r for r, _ in outs]
    embed_times = [t["embed_s"] for _, t in outs]
    extract_times = [t["extract_s"] for _, t in outs]
    return {
        "rows": rows,
        "aggregates": _aggregate(rows),
        "timings": {
            "embed": _phase_stats(embed_times),
            "extract": _phase_stats(extract_times),
        },
    }


def _aggregate(rows: list) -> dict:
    if not rows:
        return {}
    agg = {}
    for key in rows[0]:
        if key == "item":
            continue
        vals = [row[key] for row in rows]
        if all(isinstance(v, (int, float)) for v in vals):
            agg[key] = float(np.mean([float(v) for v in vals]))
    return agg


def _phase_stats(seconds: list) -> dict:
    if not seconds:
        return {"n": 0, "total_ms": 0.0, "median_ms": 0.0, "p90_ms": 0.0}
    ms = np.asarray(seconds, dtype=np.float64) * 1e3
    return {
        "n": int(ms.size),
        "total_ms": float(ms.sum()),
        "median_ms": float(np.median(ms)),
        "p90_ms": float(np.percentile(ms, 90)),
    }


# ---------------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    task: str
    seed: int
    toolkit_version: str
    timestamp: str
    config: dict
    results: dict
    tables: dict
    matrices: dict
    timings: dict


def report_to_dict(report: RunReport) -> dict:
    return _sanitize(
        {
            "task": report.task,
            "seed": report.seed,
            "toolkit_version": report.toolkit_version,
            "timestamp": report.timestamp,
            "config": report.config,
            "results": report.results,
            "tables": report.tables,
            "matrices": report.matrices,
            "timings": report.timings,
        }
    )


def strip_volatile(report_dict: dict) -> dict:
    """Drop the wall-clock fields; what remains must be seed-deterministic."""
    out = dict(report_dict)
    out.pop("timestamp", None)
    out.pop("timings", None)
    return out


def _sanitize(obj):
    # JSON-safe deep copy: numpy scalars to python, non-finite floats to strings
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def emit_report(report: RunReport, out_dir) -> dict:
    """Write report.json plus one CSV per table and matrix; returns paths.

    Emission is deterministic: identical reports produce byte-identical
    files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report_to_dict(report)
    paths = {"report": out / "report.json"}
    paths["report"].write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    for name, rows in report.tables.items():
        if not rows:
            continue
        path = out / f"{name}.csv"
        paths[name] = path
        sane_rows = [_sanitize(r) for r in rows]
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(sane_rows[0].keys()), lineterminator="\n")
            writer.writeheader()
            writer.writerows(sane_rows)

    for name, matrix in report.matrices.items():
        path = out / f"{name}.csv"
        paths[name] = path
        sane = _sanitize(matrix)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["train\\test"] + list(sane["col_labels"]))
            for label, row in zip(sane["row_labels"], sane["values"]):
                writer.writerow([label] + list(row))

    return {k: str(v) for k, v in paths.items()}


def _new_report(task, config, seed, results, tables, matrices, timings) -> RunReport:
    return RunReport(
        task=task,
        seed=int(seed),
        toolkit_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        config=_sanitize(config),
        results=results,
        tables=tables,
        matrices=matrices,
        timings=timings,
    )


# ---------------------------------------------------------------------------
# tasks


def run_capability(config: dict, seed: int) -> RunReport:
    """Embed/extract over a cover set; fidelity and recovery metrics per item."""
    chan = _parse_channel(config)
    core = _capability_core(config, seed, chan)
    echo = dict(config)
    echo["channel"] = _channel_echo(chan)
    return _new_report(
        task="capability",
        config=echo,
        seed=seed,
        results={"aggregates": core["aggregates"], "n_items": len(core["rows"])},
        tables={"per_item": core["rows"]},
        matrices={},
        timings=core["timings"],
    )


def _detection_materials(config: dict, master_seed: int):
    """Covers and their stegos for the train and test splits.

    Shared by run_detection and run_transfer so that a transfer matrix
    diagonal reproduces the in-domain run exactly.
    """
    items = _resolve_covers(config, master_seed)
    pconfig = config.get("payload", {"kind": "random-bits", "bpp": 1.0})
    corpus = _load_corpus(pconfig)
    base_cfg = _parse_stego(config)

    def make_stego(item: CoverItem) -> ImageBuffer:
        payload = _payload_for_item(pconfig, item, master_seed, corpus)
        cfg = _item_stego_config(base_cfg, item, master_seed)
        cap = capacity(item.image, cfg)
        if len(payload.bits) > cap:
            raise ConfigError(
                f"payload of {len(payload.bits)} bits exceeds capacity {cap} on {item.item_id}"
            )
        return embed(item.image, payload.bits, cfg).stego

    splits = {}
    for split in ("train", "test"):
        members = [it for it in items if it.split == split]
        if not members:
            raise ConfigError(f"cover source yields no '{split}' items")
        stegos = parallel_map(make_stego, members)
        splits[split] = {
            "ids": [it.item_id for it in members],
            "covers": [it.image for it in members],
            "stegos": stegos,
        }
    return splits, base_cfg


def run_detection(config: dict, seed: int) -> RunReport:
    """Train the residual-feature detector in domain and score the test split."""
    t0 = time.perf_counter()
    splits, base_cfg = _detection_materials(config, seed)
    t_materials = time.perf_counter() - t0

    dconfig = config.get("detector", {})
    t1 = time.perf_counter()
    model = train_detector(
        splits["train"]["covers"],
        splits["train"]["stegos"],
        seed=seed,
        n_learners=int(dconfig.get("n_learners", 51)),
        subspace_dim=dconfig.get("subspace_dim"),
        manifest={"method": base_cfg.method},
    )
    t_train = time.perf_counter() - t1

    t2 = time.perf_counter()
    scores, summary = evaluate_detector(model, splits["test"]["covers"], splits["test"]["stegos"])
    t_eval = time.perf_counter() - t2

    ids = splits["test"]["ids"]
    per_image = [
        {"item": ids[i % len(ids)], "label": int(scores.labels[i]), "score": float(scores.scores[i])}
        for i in range(scores.labels.size)
    ]
    results = {
        "metrics": {k: summary[k] for k in ("accuracy", "f1", "auc")},
        "confusion": {k: summary[k] for k in ("tp", "fp", "fn", "tn")},
        "threshold": model.threshold,
        "n_train_pairs": len(splits["train"]["covers"]),
        "n_test_pairs": len(splits["test"]["covers"]),
    }
    return _new_report(
        task="detection",
        config=dict(config),
        seed=seed,
        results=results,
        tables={"per_image": per_image},
        matrices={},
        timings={
            "materials_s": t_materials,
            "train_s": t_train,
            "evaluate_s": t_eval,
        },
    )


def run_transfer(config: dict, seed: int) -> RunReport:
    """Cross-condition matrix: train on condition i, evaluate on condition j.

    side="defense" trains a detector per condition and reports F1/accuracy/AUC
    matrices. side="attack" fixes (or calibrates) the embedder per condition
    and reports capability-metric matrices across conditions.
    """
    conditions = config.get("conditions")
    if not isinstance(conditions, list) or len(conditions) < 1:
        raise ConfigError("transfer needs a nonempty 'conditions' list")
    side = config.get("side", "defense")
    base = {k: v for k, v in config.items() if k not in ("conditions", "side")}
    merged = []
    labels = []
    for i, cond in enumerate(conditions):
        if not isinstance(cond, dict):
            raise ConfigError("each transfer condition must be an object")
        labels.append(str(cond.get("label", f"cond-{i}")))
        overlay = {k: v for k, v in cond.items() if k != "label"}
        merged.append({**base, **overlay})

    if side == "defense":
        return _transfer_defense(config, merged, labels, seed)
    if side == "attack":
        return _transfer_attack(config, merged, labels, seed)
    raise ConfigError(f"transfer side must be 'defense' or 'attack', got {side!r}")


def _transfer_defense(config, merged, labels, seed) -> RunReport:
    materials = []
    models = []
    for cond in merged:
        splits, base_cfg = _detection_materials(cond, seed)
        dconfig = cond.get("detector", {})
        model = train_detector(
            splits["train"]["covers"],
            splits["train"]["stegos"],
            seed=seed,
            n_learners=int(dconfig.get("n_learners", 51)),
            subspace_dim=dconfig.get("subspace_dim"),
            manifest={"method": base_cfg.method},
        )
        materials.append(splits)
        models.append(model)

    n = len(merged)
    grids = {name: [[None] * n for _ in range(n)] for name in ("f1", "accuracy", "auc")}
    for i in range(n):
        for j in range(n):
            _, summary = evaluate_detector(
                models[i], materials[j]["test"]["covers"], materials[j]["test"]["stegos"]
            )
            for name in grids:
                grids[name][i][j] = summary[name]
    matrices = {
        f"transfer_{name}": {
            "metric": name,
            "row_labels": labels,
            "col_labels": labels,
            "values": grid,
        }
        for name, grid in grids.items()
    }
    diag = [grids["f1"][i][i] for i in range(n)]
    off = [grids["f1"][i][j] for i in range(n) for j in range(n) if i != j]
    results = {
        "axis": config.get("axis", "condition"),
        "side": "defense",
        "condition_labels": labels,
        "diag_mean_f1": float(np.mean(diag)),
    }
    if off:
        results["offdiag_mean_f1"] = float(np.mean(off))
        results["diagonal_advantage_f1"] = float(np.mean(diag) - np.mean(off))
    return _new_report(
        task="transfer",
        config=dict(config),
        seed=seed,
        results=results,
        tables={},
        matrices=matrices,
        timings={},
    )


def _transfer_attack(config, merged, labels, seed) -> RunReport:
    n = len(merged)
    # Resolve the embedder per train condition (optionally channel-calibrated).
    configs = []
    for cond in merged:
        cfg = _parse_stego(cond)
        calib = cond.get("calibrate")
        if calib:
            chan = _parse_channel(cond)
            if chan is None:
                raise ConfigError("attack calibration needs a channel")
            items = [it for it in _resolve_covers(cond, seed) if it.split in ("train", "test")]
            covers = [it.image for it in items]
            pconfig = cond.get("payload", {"kind": "random-bits", "bpp": 0.05})
            corpus = _load_corpus(pconfig)
            payloads = [
                _payload_for_item(pconfig, it, seed, corpus).bits for it in items
            ]
            result = calibrate_robust(
                covers,
                payloads,
                chan,
                target_ber=float(calib.get("target_ber", 0.01)),
                deltas=tuple(calib.get("deltas", (6.0, 9.0, 12.0, 16.0))),
                repetitions=tuple(calib.get("repetitions", (1, 3, 5))),
                key=cfg.key,
            )
            cfg = result.config
        configs.append(cfg)

    runs = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            cond = dict(merged[j])
            cond["stego"] = stego_config_to_dict(configs[i])
            chan = _parse_channel(cond)
            runs[i][j] = _capability_core(cond, seed, chan)["aggregates"]

    metric_names = sorted({k for row in runs for agg in row for k in agg})
    matrices = {
        f"transfer_{name}": {
            "metric": name,
            "row_labels": labels,
            "col_labels": labels,
            "values": [[runs[i][j].get(name) for j in range(n)] for i in range(n)],
        }
        for name in metric_names
    }
    results = {
        "axis": config.get("axis", "condition"),
        "side": "attack",
        "condition_labels": labels,
        "configs": [stego_config_to_dict(c) for c in configs],
    }
    return _new_report(
        task="transfer",
        config=dict(config),
        seed=seed,
        results=results,
        tables={},
        matrices=matrices,
        timings={},
    )


def run_robustness(config: dict, seed: int) -> RunReport:
    """Capability metrics per channel over the same covers and payloads."""
    channels = config.get("channels")
    if channels is None:
        channels = ["identity", "x-sim", "facebook-sim", "jpeg75", "jpeg95", "subsample420", "resize075", "sharpen"]
    if not isinstance(channels, list) or not channels:
        raise ConfigError("robustness needs a nonempty 'channels' list")
    per_channel = []
    per_item = []
    timings = {}
    for entry in channels:
        chan = _parse_channel({"channel": entry})
        if chan is None:
            raise ConfigError("robustness channels must not be null")
        core = _capability_core(config, seed, chan)
        row = {"channel": chan.name}
        row.update(core["aggregates"])
        per_channel.append(row)
        for item_row in core["rows"]:
            per_item.append({"channel": chan.name, **item_row})
        timings[chan.name] = core["timings"]
    return _new_report(
        task="robustness",
        config=dict(config),
        seed=seed,
        results={"per_channel": per_channel},
        tables={"per_channel": per_channel, "per_item": per_item},
        matrices={},
        timings=timings,
    )


def run_efficiency(config: dict, seed: int) -> RunReport:
    """Wall-clock cost of the core phases over a small cover set."""
    cfg_covers = config.get("covers", {"kind": "synthetic", "count": 24, "channels": 1})
    items = _resolve_covers({"covers": cfg_covers}, seed)
    if len(items) < 20:
        raise ConfigError(f"efficiency needs at least 20 items, got {len(items)}")
    base_cfg = _parse_stego(config)
    pconfig = config.get("payload", {"kind": "random-bits", "bpp": 0.25})
    corpus = _load_corpus(pconfig)
    chan = _parse_channel(config)

    wall0 = time.perf_counter()
    embeds, extracts, features, scores = [], [], [], []
    stegos = []
    for item in items:
        payload = _payload_for_item(pconfig, item, seed, corpus)
        cfg = _item_stego_config(base_cfg, item, seed)
        t0 = time.perf_counter()
        result = embed(item.image, payload.bits, cfg)
        embeds.append(time.perf_counter() - t0)
        arrived = apply_channel(result.stego, chan) if chan is not None else result.stego
        t1 = time.perf_counter()
        extract(arrived, len(payload.bits), cfg)
        extracts.append(time.perf_counter() - t1)
        t2 = time.perf_counter()
        residual_features(item.image)
        features.append(time.perf_counter() - t2)
        stegos.append(result.stego)

    half = len(items) // 2
    t3 = time.perf_counter()
    model = train_detector(
        [it.image for it in items[:half]], stegos[:half], seed=seed, n_learners=17
    )
    train_s = time.perf_counter() - t3
    for item in items:
        t4 = time.perf_counter()
        score_image(model, item.image)
        scores.append(time.perf_counter() - t4)
    wall_s = time.perf_counter() - wall0

    phases = {
        "embed": _phase_stats(embeds),
        "extract": _phase_stats(extracts),
        "features": _phase_stats(features),
        "detect_train": _phase_stats([train_s]),
        "detect_score": _phase_stats(scores),
    }
    phase_total = sum(p["total_ms"] for p in phases.values())
    results = {
        "n_items": len(items),
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "platform": platform.platform(),
            "cpu_count": os.cpu_count(),
            "sb_threads": sb_threads(),
        },
    }
    return _new_report(
        task="efficiency",
        config=dict(config),
        seed=seed,
        results=results,
        tables={},
        matrices={},
        timings={
            "phases": phases,
            "phase_total_ms": phase_total,
            "wall_ms": wall_s * 1e3,
        },
    )


_RUNNERS = {
    "capability": run_capability,
    "detection": run_detection,
    "transfer": run_transfer,
    "robustness": run_robustness,
    "efficiency": run_efficiency,
}


def run_task(task: str, config: dict, seed=None, out_dir=None) -> RunReport:
    """Dispatch a task by name, resolve the seed, optionally emit the report."""
    if task not in _RUNNERS:
        raise ConfigError(f"unknown task {task!r} (known: {', '.join(TASKS)})")
    if seed is None:
        seed = config.get("seed", 0)
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer, got {seed!r}") from exc
    report = _RUNNERS[task](config, seed)
    if out_dir is not None:
        emit_report(report, out_dir)
    return report
