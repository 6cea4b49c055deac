"""Time one scattering update against group size at fixed M."""

import argparse
import time

from bdris.channel import SceneConfig, realize
from bdris.optimizer import OptimizerParams, effective_channels, matched_filter, ris_update
from bdris.scattering import RisConfig, effective_matrices, random_feasible


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    scene = SceneConfig()
    params = OptimizerParams(inner_steps=5)
    base = None
    print(f"{'group':>6} {'ms/update':>10} {'relative':>9} {'M^2/G model':>12}")
    gs = 1
    while gs <= args.M:
        cfg = RisConfig(args.M, "reflective", "group", gs)
        ch = realize(scene, cfg, 0)
        st = random_feasible(cfg, 1)
        W = matched_filter(effective_channels(ch, effective_matrices(st).phi), scene.tx_power)
        ris_update(ch, st, W, params)
        t0 = time.perf_counter()
        for _ in range(args.repeats):
            ris_update(ch, st, W, params)
        ms = (time.perf_counter() - t0) * 1e3 / args.repeats
        base = base or ms
        print(f"{gs:6d} {ms:10.3f} {ms / base:9.2f} {gs:12d}")
        gs *= 2


if __name__ == "__main__":
    main()
