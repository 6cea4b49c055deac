"""Sum-rate versus surface size for the reflective or full-space architectures."""

import argparse

from bdris import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("side", choices=["reflective", "fullspace"])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2023)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--warm-start", action="store_true",
                    help="solve nested architectures poorest first, each seeded by the previous one")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    spec = harness.preset_fig3(args.side, trials=args.trials, master_seed=args.seed)
    spec.warm_start = args.warm_start
    result = harness.run(spec, threads=args.threads)
    print(f"{'M':>4} {'architecture':<34} {'mean':>8} {'ci95':>7}")
    for p in result.points:
        print(f"{p.config.M:4d} {p.config.label():<34} {p.mean:8.3f} {p.ci95:7.3f}")
    if args.out:
        harness.write_result(result, args.out)


if __name__ == "__main__":
    main()
