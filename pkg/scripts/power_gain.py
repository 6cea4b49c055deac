"""Received-power gain of a fully- over a single-connected surface versus M."""

import argparse
import math

from bdris import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=62)
    args = ap.parse_args()

    print(f"asymptotic ratio (4/pi)^2 = {(4 / math.pi) ** 2:.4f}")
    for M in args.M:
        res = harness.run(harness.preset_power_gain(trials=args.trials, M=M, master_seed=args.seed))
        print(f"M={M:4d}  ratio={harness.power_ratio(res):.4f}")


if __name__ == "__main__":
    main()
