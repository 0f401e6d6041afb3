"""Robustness demo: push stegos through every platform preset, score recovery.

Shows the fragility/survival profile of one embedding config across the
channel presets (JPEG grades, subsampling, resize, sharpen, platform sims).
"""

import argparse
import json

from stegobench.harness import run_task

DEFAULT = {
    "covers": {"kind": "synthetic", "width": 128, "height": 128, "channels": 3, "count": 12},
    "payload": {"kind": "random-bits", "bits": 192},
    "stego": {"method": "dct-qim", "delta": 16.0, "repetition": 3, "key": 5},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="JSON task config (default: built-in demo)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="directory for report.json and CSV tables")
    args = ap.parse_args()

    config = json.load(open(args.config)) if args.config else DEFAULT
    report = run_task("robustness", config, seed=args.seed, out_dir=args.out)
    for row in report.tables["per_channel"]:
        print(f"{row['channel']:<16} ber={row['ber']:.4f}  emr={row['emr']:.2f}")
    if args.out:
        print(f"report written to {args.out}/report.json")


if __name__ == "__main__":
    main()
