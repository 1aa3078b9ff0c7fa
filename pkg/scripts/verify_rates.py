#!/usr/bin/env python3
"""Full-scale convergence-rate verification (takes a few minutes).

Fits log-log slopes of the mean objective gap for the convex and
accelerated strongly convex regimes and checks the uniform-vs-nonuniform
averaging ordering; writes rates.json under --out.
"""

import argparse
import sys

from spdpeg.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/rates")
    parser.add_argument("--iters", type=int, default=100_000)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args(argv)
    return main(["verify-rates", "--regime", "all", "--iters", str(args.iters),
                 "--seeds", str(args.seeds), "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
