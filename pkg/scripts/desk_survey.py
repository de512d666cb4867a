"""Desk-scale survey of the nine transforms on a seeded subset of an IDX image file.

    python3 scripts/desk_survey.py --data tests/data/digits-images-idx3-ubyte.gz --subset-n 500 --steps 50

Writes the subset, then runs ``itugan survey`` on it and prints the summary table.
"""
import argparse
import csv
from pathlib import Path

from itugan.cli import main as itugan
from itugan.data import load_idx, subset, write_idx


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--data", default=str(Path(__file__).resolve().parents[1] / "tests/data/digits-images-idx3-ubyte.gz"))
    ap.add_argument("--subset-n", type=int, default=500)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--batch-size", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/desk-survey")
    args = ap.parse_args()

    out = Path(args.out)
    data = write_idx(out / "subset-idx3-ubyte", subset(load_idx(args.data), args.subset_n, args.seed))
    code = itugan(["survey", "--data", str(data), "--steps", str(args.steps), "--batch-size", str(args.batch_size),
                   "--seed", str(args.seed), "--sample-every", str(args.steps), "--out", str(out)])
    with open(out / "survey.csv") as fh:
        rows = list(csv.DictReader(fh))
    cols = ["transform", "injective", "surjective", "differentiable", "continuity", "effect", "status", "final_d_loss", "final_g_loss"]
    widths = [max(len(c), *(len(r[c][:10]) for r in rows)) for c in cols]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for r in rows:
        print("  ".join(r[c][:10].ljust(w) for c, w in zip(cols, widths)))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
