"""Attack-capability demo: embed, measure fidelity, extract, score recovery.

Runs the capability task on synthetic covers with a text payload and prints
the aggregate row. Pass --config to swap in your own task file.
"""

import argparse
import json

from stegobench.harness import run_task

DEFAULT = {
    "covers": {"kind": "synthetic", "width": 256, "height": 256, "channels": 3, "count": 20},
    "payload": {"kind": "synthetic-text", "min_chars": 48, "max_chars": 96},
    "stego": {"method": "dct-qim", "delta": 10.0, "key": 2024},
    "channel": "identity",
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="JSON task config (default: built-in demo)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="directory for report.json and CSV tables")
    args = ap.parse_args()

    config = json.load(open(args.config)) if args.config else DEFAULT
    report = run_task("capability", config, seed=args.seed, out_dir=args.out)
    print(json.dumps(report.results["aggregates"], indent=2, default=str))
    if args.out:
        print(f"report written to {args.out}/report.json")


if __name__ == "__main__":
    main()
