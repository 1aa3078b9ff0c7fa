#!/usr/bin/env python3
"""Desk-scale fused logistic regression comparison.

Runs all three solvers on a synthetic fused-signal instance over several
seeds, then merges the traces into tidy plot data (objective, test loss,
accuracy, feasibility gap per solver/iteration with mean and stderr).
"""

import argparse
import sys

from spdpeg.cli import main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/flr")
    parser.add_argument("--d", type=int, default=50)
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--iters", type=int, default=10_000)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args(argv)

    rc = main(["run", "--task", "flr",
               "--synthetic", f"fused-signal:d={args.d},N={args.n}",
               "--solver", "all", "--iters", str(args.iters),
               "--seeds", str(args.seeds), "--eval-every", "100",
               "--out", args.out])
    if rc != 0:
        return rc
    return main(["plotdata", "--in", f"{args.out}/trace_*.csv",
                 "--out", f"{args.out}/figures.csv"])


if __name__ == "__main__":
    sys.exit(run())
