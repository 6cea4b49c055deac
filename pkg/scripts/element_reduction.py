"""How many antennas a 6-sector surface needs to match a 3-sector surface of M=48."""

import argparse

from bdris import harness
from bdris.channel import SceneConfig


def mean_rate(scene, M, L, trials, seed, threads):
    sw = [harness.SweepPoint(M, "multi_sector", "single", sectors=L)]
    spec = harness.ExperimentSpec(scene=scene, sweeps=sw, trials=trials, master_seed=seed)
    return harness.run(spec, threads=threads).points[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=60)
    ap.add_argument("--seed", type=int, default=4242)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--reference-M", type=int, default=48)
    args = ap.parse_args()

    scene = SceneConfig(N=6, K=6)
    ref = mean_rate(scene, args.reference_M, 3, args.trials, args.seed, args.threads)
    print(f"3-sector M={args.reference_M}: {ref.mean:.3f} +- {ref.ci95:.3f}")
    for M in range(args.reference_M + 12, 5, -6):
        p = mean_rate(scene, M, 6, args.trials, args.seed, args.threads)
        mark = ">=" if p.mean >= ref.mean else "< "
        print(f"6-sector M={M:3d}: {p.mean:.3f} +- {p.ci95:.3f}  {mark} reference")


if __name__ == "__main__":
    main()
