"""Command line front end (installed as ``sb``).

Exit codes: 0 on success, 2 for configuration problems (bad flags, malformed
config files, unknown presets), 3 for runtime failures (unreadable images,
infeasible payloads).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .channel import OutOfRangeError, UnknownPresetError, apply_channel, channel_from_dict, platform_preset
from .harness import TASKS, ConfigError, run_task
from .imagecore import read_image, write_image
from .metrics import lpips, default_lpips_model, pixel_fidelity, ssim
from .payloadcodec import BitString, bits_to_text, random_bits, text_to_bits
from .steganalysis import (
    evaluate_detector,
    load_model,
    save_model,
    score_image,
    train_detector,
)
from .stego import StegoConfig, UnknownMethodError, embed, extract, stego_config_from_dict

_CONFIG_ERRORS = (
    ConfigError,
    OutOfRangeError,
    UnknownPresetError,
    UnknownMethodError,
    json.JSONDecodeError,
)


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return doc


def _stego_config(args) -> StegoConfig:
    if args.config:
        doc = _load_json(args.config)
        doc = doc.get("stego", doc)  # accept either a bare config or a task file
        try:
            cfg = stego_config_from_dict(doc)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad stego config in {args.config}: {exc}") from exc
    else:
        cfg = StegoConfig(method=args.method)
    overrides = {}
    if args.key is not None:
        overrides["key"] = args.key
    if getattr(args, "k_planes", None) is not None:
        overrides["k_planes"] = args.k_planes
    if getattr(args, "delta", None) is not None:
        overrides["delta"] = args.delta
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def _payload_bits(args) -> BitString:
    given = [x for x in (args.text, args.text_file, args.bits_file, args.random_bits) if x is not None]
    if len(given) != 1:
        raise ConfigError("give exactly one of --text, --text-file, --bits-file, --random-bits")
    if args.text is not None:
        return text_to_bits(args.text)
    if args.text_file is not None:
        return text_to_bits(Path(args.text_file).read_text(encoding="utf-8"))
    if args.bits_file is not None:
        raw = Path(args.bits_file).read_text(encoding="ascii").strip()
        if raw and set(raw) - {"0", "1"}:
            raise ConfigError("--bits-file must contain only '0' and '1' characters")
        return BitString.from01(raw)
    return random_bits(args.random_bits, args.seed or 0)


def _cmd_embed(args) -> int:
    cfg = _stego_config(args)
    cover = read_image(args.cover)
    bits = _payload_bits(args)
    result = embed(cover, bits, cfg)
    write_image(result.stego, args.out)
    fid = pixel_fidelity(cover, result.stego)
    print(
        json.dumps(
            {
                "out": args.out,
                "bits": len(bits),
                "capacity_bits": result.capacity_bits,
                "psnr_db": "inf" if fid["psnr_db"] == float("inf") else fid["psnr_db"],
            }
        )
    )
    return 0


def _cmd_extract(args) -> int:
    cfg = _stego_config(args)
    stego = read_image(args.stego)
    if args.n_bits is None and args.chars is None:
        raise ConfigError("give --n-bits or --chars")
    n_bits = args.n_bits if args.n_bits is not None else args.chars * 8
    bits = extract(stego, n_bits, cfg)
    payload = bits_to_text(bits) if args.as_text else bits.to01()
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        print(payload)
    return 0


def _cmd_perturb(args) -> int:
    if (args.preset is None) == (args.config is None):
        raise ConfigError("give exactly one of --preset or --config")
    chan = platform_preset(args.preset) if args.preset else channel_from_dict(_load_json(args.config))
    image = read_image(args.image)
    write_image(apply_channel(image, chan), args.out)
    print(json.dumps({"out": args.out, "channel": chan.name}))
    return 0


def _cmd_metrics(args) -> int:
    ref = read_image(args.ref)
    test = read_image(args.test)
    out = pixel_fidelity(ref, test)
    out["ssim"] = ssim(ref, test)
    out["lpips"] = lpips(ref, test, default_lpips_model(ref.channels))
    if out["psnr_db"] == float("inf"):
        out["psnr_db"] = "inf"
    doc = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(doc + "\n", encoding="utf-8")
    print(doc)
    return 0


def _glob_images(directory: str) -> list:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise ConfigError(f"no .png images under {directory}")
    return [read_image(str(p)) for p in paths]


def _cmd_detect_train(args) -> int:
    covers = _glob_images(args.covers)
    stegos = _glob_images(args.stegos)
    model = train_detector(
        covers,
        stegos,
        seed=args.seed or 0,
        n_learners=args.learners,
        manifest={"covers": args.covers, "stegos": args.stegos},
    )
    save_model(model, args.out)
    print(json.dumps({"out": args.out, "learners": len(model.learners), "threshold": model.threshold}))
    return 0


def _cmd_detect_score(args) -> int:
    model = load_model(args.model)
    image = read_image(args.image)
    score = score_image(model, image)
    print(
        json.dumps(
            {"score": score, "threshold": model.threshold, "stego": bool(score >= model.threshold)}
        )
    )
    return 0


def _cmd_detect_eval(args) -> int:
    model = load_model(args.model)
    covers = _glob_images(args.covers)
    stegos = _glob_images(args.stegos)
    _, summary = evaluate_detector(model, covers, stegos)
    doc = json.dumps({k: summary[k] for k in ("accuracy", "f1", "auc", "tp", "fp", "fn", "tn")}, indent=2)
    if args.out:
        Path(args.out).write_text(doc + "\n", encoding="utf-8")
    print(doc)
    return 0


def _cmd_run(args) -> int:
    config = _load_json(args.config) if args.config else {}
    report = run_task(args.task, config, seed=args.seed, out_dir=args.out)
    summary = {"task": report.task, "seed": report.seed}
    if args.out:
        summary["out"] = str(Path(args.out) / "report.json")
    print(json.dumps(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sb", description="Image steganography evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="hide a payload in a cover image")
    p.add_argument("--cover", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with a stego config")
    p.add_argument("--method", default="lsb-replace")
    p.add_argument("--k-planes", type=int, dest="k_planes")
    p.add_argument("--delta", type=float)
    p.add_argument("--key", type=int)
    p.add_argument("--text")
    p.add_argument("--text-file")
    p.add_argument("--bits-file")
    p.add_argument("--random-bits", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("extract", help="recover a payload from a stego image")
    p.add_argument("--stego", required=True)
    p.add_argument("--config", help="JSON file with a stego config")
    p.add_argument("--method", default="lsb-replace")
    p.add_argument("--k-planes", type=int, dest="k_planes")
    p.add_argument("--delta", type=float)
    p.add_argument("--key", type=int)
    p.add_argument("--n-bits", type=int)
    p.add_argument("--chars", type=int)
    p.add_argument("--text", action="store_true", dest="as_text", help="decode bits as UTF-8 text")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("perturb", help="pass an image through a channel simulation")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preset")
    p.add_argument("--config", help="JSON file with a channel spec")
    p.set_defaults(fn=_cmd_perturb)

    p = sub.add_parser("metrics", help="fidelity metrics between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("detect-train", help="train a detector on cover/stego directories")
    p.add_argument("--covers", required=True)
    p.add_argument("--stegos", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--learners", type=int, default=51)
    p.set_defaults(fn=_cmd_detect_train)

    p = sub.add_parser("detect-score", help="score one image with a saved detector")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(fn=_cmd_detect_score)

    p = sub.add_parser("detect-eval", help="evaluate a saved detector on labeled directories")
    p.add_argument("--model", required=True)
    p.add_argument("--covers", required=True)
    p.add_argument("--stegos", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_detect_eval)

    p = sub.add_parser("run", help="run an experiment task from a config file")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as exc:
        print(f"sb: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"sb: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
