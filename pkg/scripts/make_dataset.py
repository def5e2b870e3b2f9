#!/usr/bin/env python3
"""End-to-end dataset build: generate scenes, render both passes, report stats.

Example:
    python3 scripts/make_dataset.py --out runs/demo --count 10 --seed 0 \
        --height 240 --width 320 --spp 2
"""

import argparse
import sys

from glasstrace.cli import main as cli_main


def run(argv):
    print(f"+ glasstrace {' '.join(argv)}", file=sys.stderr)
    code = cli_main(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", help="generator config JSON")
    ap.add_argument("--height", type=int, default=240)
    ap.add_argument("--width", type=int, default=320)
    ap.add_argument("--spp", type=int, default=2)
    ap.add_argument("--workers", type=int, default=0)
    args = ap.parse_args()

    gen = ["generate", "--count", str(args.count), "--seed", str(args.seed),
           "--out", args.out, "--resume"]
    if args.config:
        gen += ["--config", args.config]
    run(gen)
    manifest = f"{args.out}/manifest.json"
    run(["render", "--manifest", manifest,
         "--resolution", str(args.height), str(args.width),
         "--spp", str(args.spp), "--workers", str(args.workers), "--resume"])
    run(["stats", "--manifest", manifest])


if __name__ == "__main__":
    main()
