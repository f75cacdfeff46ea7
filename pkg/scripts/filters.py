"""Block masses of the learned linear filter at zero and strong transverse field.

    python scripts/filters.py --jx-list 0,3 --seeds 3
"""
import argparse
import csv
import logging

import numpy as np

from bdrbm.sweeps import filter_masses

KEYS = ["visible_bias", "hidden_bias", "weight", "visible_bias_x", "visible_bias_z"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sites", type=int, default=6)
    ap.add_argument("--jx-list", default="0,3")
    ap.add_argument("--bases", type=int, default=200)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out", default="filters.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    rows = []
    for jx in (float(v) for v in args.jx_list.split(",")):
        for seed in range(args.seeds):
            rows.append({"jx": jx, "seed": seed, **filter_masses(args.sites, jx, seed, args.bases)})
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["jx", "seed", *KEYS], lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: repr(v) if isinstance(v, float) else v for k, v in r.items()}
                         for r in rows)
    print("jx     " + "  ".join(KEYS))
    for jx in sorted({r["jx"] for r in rows}):
        sel = [r for r in rows if r["jx"] == jx]
        print(f"{jx:<6} " + "  ".join(f"{np.mean([r[k] for r in sel]):.3f}" for k in KEYS))


if __name__ == "__main__":
    main()
