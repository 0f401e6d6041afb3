"""Experiment harness: splits, config parsing, reports, task runners."""

import copy
import json
import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stegobench.harness import (
    TASKS,
    ConfigError,
    TooFewImagesError,
    emit_report,
    parallel_map,
    report_to_dict,
    run_task,
    sb_threads,
    split_dataset,
    strip_volatile,
)

# ---------------------------------------------------------------------------
# dataset splitting


def _paths(n):
    return [f"img_{i:04d}.png" for i in range(n)]


def test_split_sizes_n10():
    m = split_dataset(_paths(10), seed=0)
    assert len(m.train) == 7
    assert len(m.val) == 1
    assert len(m.test) == 2


def test_split_sizes_n37():
    m = split_dataset(_paths(37), seed=0)
    # rounded 7:1:2 of 37 = 26 / 4 / 7
    assert (len(m.train), len(m.val), len(m.test)) == (26, 4, 7)


def test_split_too_few():
    with pytest.raises(TooFewImagesError):
        split_dataset(_paths(9), seed=0)


def test_split_deterministic():
    a = split_dataset(_paths(25), seed=7, name="x")
    b = split_dataset(_paths(25), seed=7, name="x")
    assert a.entries == b.entries
    c = split_dataset(_paths(25), seed=8)
    assert a.entries != c.entries


def test_split_preserves_input_order():
    m = split_dataset(_paths(12), seed=3)
    assert [p for p, _ in m.entries] == _paths(12)


@given(st.integers(10, 200), st.integers(0, 2**31 - 1))
def test_split_is_partition(n, seed):
    m = split_dataset(_paths(n), seed=seed)
    train, val, test = m.train, m.val, m.test
    assert len(train) + len(val) + len(test) == n
    assert set(train) | set(val) | set(test) == set(_paths(n))
    assert not (set(train) & set(test))
    assert not (set(train) & set(val))
    assert len(train) == int(0.7 * n + 0.5)
    assert len(val) == int(0.1 * n + 0.5)


# ---------------------------------------------------------------------------
# threading


def test_sb_threads_env(monkeypatch):
    monkeypatch.delenv("SB_THREADS", raising=False)
    assert sb_threads() == 1
    monkeypatch.setenv("SB_THREADS", "4")
    assert sb_threads() == 4
    monkeypatch.setenv("SB_THREADS", "0")
    assert sb_threads() == 1


def test_parallel_map_order(monkeypatch):
    monkeypatch.setenv("SB_THREADS", "3")
    out = parallel_map(lambda x: x * x, list(range(20)))
    assert out == [x * x for x in range(20)]


# ---------------------------------------------------------------------------
# capability runs


def _capability_config(count=4, payload=None, **stego):
    return {
        "covers": {"kind": "synthetic", "width": 32, "height": 32, "channels": 1, "count": count},
        "payload": payload or {"kind": "random-bits", "bits": 64},
        "stego": {"method": "lsb-replace", "k_planes": 1, "key": 11, **stego},
    }


def test_run_capability_basic():
    report = run_task("capability", _capability_config(), seed=5)
    assert report.task == "capability"
    assert report.seed == 5
    rows = report.tables["per_item"]
    assert len(rows) == 4
    for row in rows:
        assert row["ber"] == 0.0
        assert row["emr"] == 1.0
        assert row["psnr_db"] > 40.0
    agg = report.results["aggregates"]
    assert agg["ber"] == 0.0


def test_run_capability_reproducible():
    a = run_task("capability", _capability_config(), seed=9)
    b = run_task("capability", _capability_config(), seed=9)
    assert strip_volatile(report_to_dict(a)) == strip_volatile(report_to_dict(b))
    c = run_task("capability", _capability_config(), seed=10)
    assert strip_volatile(report_to_dict(a)) != strip_volatile(report_to_dict(c))


def test_thread_count_does_not_change_results(monkeypatch):
    monkeypatch.setenv("SB_THREADS", "1")
    a = run_task("capability", _capability_config(count=6), seed=2)
    monkeypatch.setenv("SB_THREADS", "3")
    b = run_task("capability", _capability_config(count=6), seed=2)
    assert strip_volatile(report_to_dict(a)) == strip_volatile(report_to_dict(b))


def test_capability_text_payload():
    cfg = _capability_config(payload={"kind": "synthetic-text", "min_chars": 8, "max_chars": 12})
    report = run_task("capability", cfg, seed=1)
    for row in report.tables["per_item"]:
        assert row["emr"] == 1.0
        assert row["cer"] == 0.0


def test_capability_image_payload():
    cfg = _capability_config(payload={"kind": "synthetic-image", "ratio": 0.05})
    report = run_task("capability", cfg, seed=1)
    for row in report.tables["per_item"]:
        assert row["ber"] == 0.0
        assert row["secret_mae"] == 0.0


def test_capability_bpp_payload():
    cfg = _capability_config(payload={"kind": "random-bits", "bpp": 0.5})
    report = run_task("capability", cfg, seed=1)
    for row in report.tables["per_item"]:
        assert row["bits"] == round(0.5 * 32 * 32)


def test_capability_with_channel():
    cfg = _capability_config()
    cfg["channel"] = "identity"
    report = run_task("capability", cfg, seed=1)
    assert report.results["aggregates"]["ber"] == 0.0


def test_config_errors():
    with pytest.raises(ConfigError):
        run_task("no-such-task", {}, seed=0)
    with pytest.raises(ConfigError):
        run_task("capability", _capability_config(), seed="not-a-number")
    bad = _capability_config()
    bad["covers"]["kind"] = "martian"
    with pytest.raises(ConfigError):
        run_task("capability", bad, seed=0)
    bad2 = _capability_config(payload={"kind": "telepathy"})
    with pytest.raises(ConfigError):
        run_task("capability", bad2, seed=0)


def test_tasks_tuple():
    assert TASKS == ("capability", "detection", "transfer", "robustness", "efficiency")


# ---------------------------------------------------------------------------
# report emission


def test_emit_report_files(tmp_path):
    report = run_task("capability", _capability_config(), seed=3)
    paths = emit_report(report, tmp_path)
    assert os.path.basename(paths["report"]) == "report.json"
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["task"] == "capability"
    assert doc["seed"] == 3
    assert "timestamp" in doc
    csvs = [p for k, p in paths.items() if p.endswith(".csv")]
    assert csvs, "expected at least one CSV table"
    per_item = (tmp_path / "per_item.csv").read_text()
    header = per_item.splitlines()[0]
    assert "ber" in header.split(",")
    assert len(per_item.splitlines()) == 1 + 4  # header + one row per item


def test_report_json_is_plain_types(tmp_path):
    report = run_task("capability", _capability_config(), seed=3)
    doc = report_to_dict(report)
    json.dumps(doc)  # must not choke on numpy scalars


def test_inf_sanitized():
    # identity channel + zero-bit payload keeps the cover byte-identical,
    # giving an infinite PSNR that must serialize as a string sentinel
    cfg = _capability_config(payload={"kind": "random-bits", "bits": 0})
    report = run_task("capability", cfg, seed=0)
    doc = report_to_dict(report)
    assert doc["tables"]["per_item"][0]["psnr_db"] == "inf"
    json.dumps(doc)


def test_strip_volatile_removes_timing():
    report = run_task("capability", _capability_config(), seed=0)
    doc = report_to_dict(report)
    stripped = strip_volatile(copy.deepcopy(doc))
    assert "timestamp" not in stripped
    assert "timings" not in stripped
    assert "timestamp" in doc


# ---------------------------------------------------------------------------
# other task runners (small smoke sizes; acceptance tests run real scales)


def test_run_detection_smoke():
    cfg = {
        "covers": {
            "kind": "synthetic",
            "width": 48,
            "height": 48,
            "channels": 1,
            "train": 16,
            "val": 0,
            "test": 8,
        },
        "payload": {"kind": "random-bits", "bpp": 1.0},
        "stego": {"method": "lsb-replace", "k_planes": 1, "key": 3},
        "detector": {"n_learners": 9},
    }
    report = run_task("detection", cfg, seed=4)
    m = report.results["metrics"]
    assert set(["accuracy", "f1"]) <= set(m)
    assert report.results["n_train_pairs"] == 16
    assert report.results["n_test_pairs"] == 8
    assert len(report.tables["per_image"]) == 16  # 8 covers + 8 stegos


def test_run_robustness_smoke():
    cfg = {
        "covers": {"kind": "synthetic", "width": 32, "height": 32, "channels": 1, "count": 3},
        "payload": {"kind": "random-bits", "bits": 128},
        "stego": {"method": "lsb-replace", "key": 1},
        "channels": ["identity", "jpeg95"],
    }
    report = run_task("robustness", cfg, seed=0)
    per_channel = {row["channel"]: row for row in report.tables["per_channel"]}
    assert set(per_channel) == {"identity", "jpeg95"}
    assert per_channel["identity"]["ber"] == 0.0
    # jpeg95 destroys LSB-replacement payloads
    assert per_channel["jpeg95"]["ber"] > 0.2


def test_run_robustness_default_channels():
    cfg = {
        "covers": {"kind": "synthetic", "width": 32, "height": 32, "channels": 1, "count": 2},
        "payload": {"kind": "random-bits", "bits": 32},
        "stego": {"method": "lsb-replace", "key": 1},
    }
    report = run_task("robustness", cfg, seed=0)
    names = [row["channel"] for row in report.tables["per_channel"]]
    assert names == [
        "identity",
        "x-sim",
        "facebook-sim",
        "jpeg75",
        "jpeg95",
        "subsample420",
        "resize075",
        "sharpen",
    ]


def test_run_efficiency_smoke():
    cfg = {
        "covers": {"kind": "synthetic", "width": 64, "height": 64, "channels": 1, "count": 20},
        "payload": {"kind": "random-bits", "bpp": 0.25},
        "stego": {"method": "lsb-replace", "key": 5},
    }
    report = run_task("efficiency", cfg, seed=1)
    phases = report.timings["phases"]
    assert set(phases) == {"embed", "extract", "features", "detect_train", "detect_score"}
    assert phases["embed"]["n"] == 20
    total = sum(phases[p]["total_ms"] for p in phases)
    assert report.timings["phase_total_ms"] == pytest.approx(total)
    assert report.results["environment"]["sb_threads"] == sb_threads()


def test_run_efficiency_rejects_small_sets():
    cfg = {
        "covers": {"kind": "synthetic", "width": 64, "height": 64, "channels": 1, "count": 4},
        "payload": {"kind": "random-bits", "bits": 16},
        "stego": {"method": "lsb-replace", "key": 5},
    }
    with pytest.raises(ConfigError):
        run_task("efficiency", cfg, seed=1)


def test_run_transfer_defense_smoke():
    cfg = {
        "side": "defense",
        "covers": {
            "kind": "synthetic",
            "width": 48,
            "height": 48,
            "channels": 1,
            "train": 12,
            "val": 0,
            "test": 6,
        },
        "payload": {"kind": "random-bits", "bpp": 1.0},
        "detector": {"n_learners": 7},
        "conditions": [
            {"label": "replace", "stego": {"method": "lsb-replace", "key": 3}},
            {"label": "match", "stego": {"method": "lsb-match", "key": 3}},
        ],
    }
    report = run_task("transfer", cfg, seed=2)
    grid = report.matrices["transfer_f1"]
    assert grid["row_labels"] == ["replace", "match"]
    assert grid["col_labels"] == ["replace", "match"]
    rows = grid["values"]
    assert len(rows) == 2 and len(rows[0]) == 2
    assert "diagonal_advantage_f1" in report.results


def test_run_capability_emits_via_out_dir(tmp_path):
    report = run_task("capability", _capability_config(), seed=0, out_dir=tmp_path)
    assert (tmp_path / "report.json").exists()
    assert report.task == "capability"
