"""Command line interface, exercised through main(argv)."""

import json

import numpy as np
import pytest

from stegobench.cli import main
from stegobench.imagecore import read_image, write_image
from stegobench.synthetic import synth_cover


@pytest.fixture
def cover_png(tmp_path):
    path = tmp_path / "cover.png"
    write_image(synth_cover(21, 64, 64, 3), str(path))
    return path


def test_embed_extract_text_round_trip(tmp_path, cover_png, capsys):
    stego = tmp_path / "stego.png"
    rc = main(
        [
            "embed",
            "--cover", str(cover_png),
            "--out", str(stego),
            "--method", "lsb-replace",
            "--key", "42",
            "--text", "secret message",
        ]
    )
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["out"] == str(stego)
    assert doc["bits"] == len("secret message") * 8
    assert doc["psnr_db"] != "inf"
    assert stego.exists()

    rc = main(
        [
            "extract",
            "--stego", str(stego),
            "--method", "lsb-replace",
            "--key", "42",
            "--chars", "14",
            "--text",
        ]
    )
    assert rc == 0
    # extract prints the recovered payload itself, not JSON
    assert capsys.readouterr().out == "secret message\n"


def test_embed_requires_exactly_one_payload(cover_png, tmp_path, capsys):
    base = ["embed", "--cover", str(cover_png), "--out", str(tmp_path / "s.png")]
    assert main(base) == 2  # none given
    assert main(base + ["--text", "a", "--random-bits", "8"]) == 2  # two given
    capsys.readouterr()


def test_embed_random_bits_and_extract_bits(tmp_path, cover_png, capsys):
    stego = tmp_path / "s.png"
    rc = main(
        ["embed", "--cover", str(cover_png), "--out", str(stego),
         "--random-bits", "256", "--seed", "7", "--key", "3"]
    )
    assert rc == 0
    capsys.readouterr()
    rc = main(["extract", "--stego", str(stego), "--key", "3", "--n-bits", "256"])
    assert rc == 0
    bits = capsys.readouterr().out.strip()
    assert len(bits) == 256
    assert set(bits) <= {"0", "1"}


def test_embed_with_config_file(tmp_path, cover_png, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "dct-qim", "delta": 12.0, "key": 9}))
    stego = tmp_path / "s.png"
    rc = main(
        ["embed", "--cover", str(cover_png), "--out", str(stego),
         "--config", str(cfg), "--text", "qim text here"]
    )
    assert rc == 0
    capsys.readouterr()
    rc = main(
        ["extract", "--stego", str(stego), "--config", str(cfg), "--chars", "13", "--text"]
    )
    assert rc == 0
    assert capsys.readouterr().out == "qim text here\n"


def test_payload_too_large_is_runtime_error(tmp_path, capsys):
    # the config itself is fine; the payload just does not fit this cover
    tiny = tmp_path / "tiny.png"
    write_image(synth_cover(1, 8, 8, 1), str(tiny))
    rc = main(
        ["embed", "--cover", str(tiny), "--out", str(tmp_path / "s.png"),
         "--random-bits", "100000", "--key", "1"]
    )
    assert rc == 3
    capsys.readouterr()


def test_missing_cover_is_runtime_error(tmp_path, capsys):
    rc = main(
        ["embed", "--cover", str(tmp_path / "nope.png"), "--out", str(tmp_path / "s.png"),
         "--text", "x"]
    )
    assert rc == 3
    capsys.readouterr()


def test_perturb_preset(tmp_path, cover_png, capsys):
    out = tmp_path / "p.png"
    rc = main(["perturb", "--image", str(cover_png), "--out", str(out), "--preset", "jpeg75"])
    assert rc == 0
    capsys.readouterr()
    before = read_image(str(cover_png))
    after = read_image(str(out))
    assert after.pixels.shape == before.pixels.shape
    assert not np.array_equal(after.pixels, before.pixels)


def test_perturb_unknown_preset(tmp_path, cover_png, capsys):
    rc = main(
        ["perturb", "--image", str(cover_png), "--out", str(tmp_path / "p.png"),
         "--preset", "telegram-sim"]
    )
    assert rc == 2
    capsys.readouterr()


def test_perturb_needs_exactly_one_spec(tmp_path, cover_png, capsys):
    rc = main(["perturb", "--image", str(cover_png), "--out", str(tmp_path / "p.png")])
    assert rc == 2
    capsys.readouterr()


def test_metrics_json(tmp_path, cover_png, capsys):
    other = tmp_path / "other.png"
    img = read_image(str(cover_png))
    arr = img.pixels.copy()
    arr[0, 0, 0] ^= 1
    write_image(type(img)(arr, img.colorspace), str(other))
    rc = main(["metrics", "--ref", str(cover_png), "--test", str(other)])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(["mae", "psnr_db", "ssim", "lpips"]) <= set(doc)
    assert doc["psnr_db"] > 50.0


def test_detect_flow(tmp_path, capsys):
    from stegobench.payloadcodec import random_bits
    from stegobench.stego import StegoConfig, capacity, embed

    cover_dir = tmp_path / "covers"
    stego_dir = tmp_path / "stegos"
    cover_dir.mkdir()
    stego_dir.mkdir()
    cfg = StegoConfig(method="lsb-replace", key=8)
    for i in range(10):
        c = synth_cover(300 + i, 48, 48, 1)
        write_image(c, str(cover_dir / f"c{i:02d}.png"))
        bits = random_bits(capacity(c, cfg), seed=i)
        write_image(embed(c, bits, cfg).stego, str(stego_dir / f"s{i:02d}.png"))

    model_path = tmp_path / "model.json"
    rc = main(
        ["detect-train", "--covers", str(cover_dir), "--stegos", str(stego_dir),
         "--out", str(model_path), "--seed", "0", "--learners", "9"]
    )
    assert rc == 0
    capsys.readouterr()
    assert model_path.exists()

    rc = main(["detect-score", "--model", str(model_path), "--image", str(stego_dir / "s00.png")])
    assert rc == 0
    scored = json.loads(capsys.readouterr().out)
    assert set(["score", "threshold", "stego"]) <= set(scored)
    assert isinstance(scored["stego"], bool)

    rc = main(
        ["detect-eval", "--model", str(model_path), "--covers", str(cover_dir),
         "--stegos", str(stego_dir)]
    )
    assert rc == 0
    evald = json.loads(capsys.readouterr().out)
    assert "f1" in evald
    assert evald["accuracy"] >= 0.7  # training set, full-rate LSB


def test_run_task_via_cli(tmp_path, capsys):
    cfg = tmp_path / "task.json"
    cfg.write_text(
        json.dumps(
            {
                "covers": {
                    "kind": "synthetic",
                    "width": 32,
                    "height": 32,
                    "channels": 1,
                    "count": 3,
                },
                "payload": {"kind": "random-bits", "bits": 64},
                "stego": {"method": "lsb-replace", "key": 2},
            }
        )
    )
    out_dir = tmp_path / "out"
    rc = main(["run", "capability", "--config", str(cfg), "--seed", "5", "--out", str(out_dir)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["task"] == "capability"
    assert (out_dir / "report.json").exists()


def test_run_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{not json")
    rc = main(["run", "capability", "--config", str(cfg)])
    assert rc == 2
    capsys.readouterr()


def test_run_missing_config_file(tmp_path, capsys):
    rc = main(["run", "capability", "--config", str(tmp_path / "absent.json")])
    assert rc == 2
    capsys.readouterr()
