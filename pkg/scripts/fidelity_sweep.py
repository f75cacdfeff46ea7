"""Fidelity of the 6-site chain across the transverse field, four series per point.

    python scripts/fidelity_sweep.py --out fidelity.csv --seeds 3
"""
import argparse
import logging

from bdrbm.sweeps import FIDELITY_COLUMNS, mean_by, sweep_fidelity, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sites", type=int, default=6)
    ap.add_argument("--jx-list", default="0,0.4,0.8,1.0,1.5,3.0")
    ap.add_argument("--bases", type=int, default=200)
    ap.add_argument("--shots", type=int, default=8192)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", default="fidelity.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    jx_list = [float(v) for v in args.jx_list.split(",")]
    rows = sweep_fidelity(args.sites, jx_list, range(args.seeds), args.bases, args.shots,
                          jobs=args.jobs)
    write_csv(args.out, rows, FIDELITY_COLUMNS)
    means = mean_by(rows, ["jx", "split", "kind"], "mean_fc")
    series = sorted({k[1:] for k in means})
    print("jx     " + "  ".join(f"{s}/{k}" for s, k in series))
    for jx in jx_list:
        print(f"{jx:<6} " + "  ".join(f"{means[(jx, s, k)]:.4f}" for s, k in series))


if __name__ == "__main__":
    main()
