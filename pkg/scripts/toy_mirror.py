"""Train on the 2x2 two-mode toy with the mirror unit and check that G learns the mirror.

    python3 scripts/toy_mirror.py --steps 2000 --out runs/toy-mirror
"""
import argparse
import time

import numpy as np

from itugan.gan import TrainConfig, sample, train
from itugan.gan.train import TOY_SIZE, toy_two_mode


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--transform", default="T1")
    ap.add_argument("--samples", type=int, default=4096)
    ap.add_argument("--out", default="runs/toy-mirror")
    args = ap.parse_args()

    cfg = TrainConfig(data="toy", transform=args.transform, arch="mlp", latent_dim=8, hidden=32,
                      steps=args.steps, seed=args.seed, out=args.out, sample_every=max(args.steps // 4, 1))
    t0 = time.perf_counter()
    res = train(cfg)
    print(f"{res.steps_done} steps in {time.perf_counter() - t0:.1f} s; halted={res.halted}")
    if res.checkpoint is None:
        return 1
    data = toy_two_mode(TOY_SIZE, cfg.subset_seed).mean(axis=0)
    seen = sample(res.checkpoint, args.samples, seed=1, apply_T=True)[:, 0].mean(axis=0)
    raw = sample(res.checkpoint, args.samples, seed=1)[:, 0].mean(axis=0)
    np.set_printoptions(precision=4, suppress=True)
    print("data mean\n", data)
    print("mean T(G(z))\n", seen)
    print("mean G(z)\n", raw)
    print("mirrored data mean\n", data[:, ::-1])
    print(f"max |T(G(z)) - data| = {np.abs(seen - data).max():.4f}")
    print(f"max |G(z) - mirrored data| = {np.abs(raw - data[:, ::-1]).max():.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
