"""Efficiency demo: per-phase timing of embed, extract, features, detection.

Reports median/p90 milliseconds per phase plus environment metadata, so runs
on different machines stay comparable.
"""

import argparse
import json

from stegobench.harness import run_task

DEFAULT = {
    "covers": {"kind": "synthetic", "width": 256, "height": 256, "channels": 1, "count": 24},
    "payload": {"kind": "random-bits", "bpp": 0.5},
    "stego": {"method": "lsb-replace", "key": 1},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="JSON task config (default: built-in demo)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="directory for report.json")
    args = ap.parse_args()

    config = json.load(open(args.config)) if args.config else DEFAULT
    report = run_task("efficiency", config, seed=args.seed, out_dir=args.out)
    for phase, stats in report.timings["phases"].items():
        print(f"{phase:<14} n={stats['n']:<4} median={stats['median_ms']:.2f}ms  p90={stats['p90_ms']:.2f}ms")
    print(json.dumps(report.results["environment"], indent=2))
    if args.out:
        print(f"report written to {args.out}/report.json")


if __name__ == "__main__":
    main()
