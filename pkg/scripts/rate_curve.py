"""Annealed rate against h next to finite-N rates from the exact count.

Writes CSV with columns h, regime, rate, and one ``logE_over_N_<N>`` column
per size, so the finite-N curves can be plotted against the limit.

    python scripts/rate_curve.py --xi 3:1 --h-max 2.5 --points 26 > rate.csv
"""

import argparse
import csv
import sys

import numpy as np

from pspin_landscape.kacrice import expected_count
from pspin_landscape.model import MixedModel, annealed_rate, classify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--xi", default="3:1")
    ap.add_argument("--h-max", type=float, default=2.5)
    ap.add_argument("--points", type=int, default=26)
    ap.add_argument("--N", default="40,80,160")
    args = ap.parse_args()

    m = MixedModel.parse(args.xi)
    sizes = [int(v) for v in args.N.split(",")]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["h", "regime", "rate"] + [f"logE_over_N_{n}" for n in sizes])
    for h in np.linspace(0.0, args.h_max, args.points):
        h = float(h)
        row = [f"{h:.9g}", classify(m, h).value, f"{annealed_rate(m, h):.9g}"]
        for n in sizes:
            row.append(f"{expected_count(m, h, n).log_value / n:.9g}")
        w.writerow(row)


if __name__ == "__main__":
    main()
