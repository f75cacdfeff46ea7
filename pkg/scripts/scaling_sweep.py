"""Predictive and reconstructive fidelity against system size and number of bases.

    python scripts/scaling_sweep.py --sites-list 6 --bases-list 25,50,100,200,400
"""
import argparse
import logging

from bdrbm.sweeps import SCALING_COLUMNS, mean_by, sweep_scaling, write_csv


def _ints(text):
    return [int(v) for v in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sites-list", type=_ints, default=[2, 4, 6, 8, 10])
    ap.add_argument("--bases-list", type=_ints, default=[25, 50, 100, 200, 400])
    ap.add_argument("--jx", type=float, default=1.0)
    ap.add_argument("--val-bases", type=int, default=40)
    ap.add_argument("--shots", type=int, default=8192)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default="scaling.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    rows = sweep_scaling(args.sites_list, args.bases_list, range(args.seeds), args.jx,
                         args.val_bases, args.shots, jobs=args.jobs)
    write_csv(args.out, rows, SCALING_COLUMNS)
    cols = ("predictive_fc", "reconstructive_fc", "gap")
    means = {c: mean_by(rows, ["sites", "n_bases"], c) for c in cols}
    print("sites  n_bases  " + "  ".join(cols))
    for key in sorted(means["gap"]):
        print(f"{key[0]:<6} {key[1]:<8} " + "  ".join(f"{means[c][key]:.4f}" for c in cols))


if __name__ == "__main__":
    main()
