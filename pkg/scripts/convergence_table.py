"""Expected number of critical points against N for the cubic model above threshold.

Prints the exact count, its gap to the large-N limit 2, and the distance of
the maximizer's spectral argument to the edge, which sets how slowly the
counts settle.

    python scripts/convergence_table.py --h 2 --N 20,40,80,160,320
"""

import argparse
import math
import time

from pspin_landscape.kacrice import expected_count, laplace_count_limit
from pspin_landscape.model import MixedModel, classify_and_maximize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--xi", default="3:1")
    ap.add_argument("--h", type=float, default=2.0)
    ap.add_argument("--N", default="20,40,80,160,320")
    ap.add_argument("--rho-mode", default="exact")
    args = ap.parse_args()

    m = MixedModel.parse(args.xi)
    rep = classify_and_maximize(m, args.h)
    print(f"# model {m}, h={args.h}, regime {rep.regime.value}")
    if rep.maximizer_eta is not None:
        print(f"# eta* - sqrt(2) = {rep.maximizer_eta - math.sqrt(2):.6g}")
        print(f"# laplace limit  = {laplace_count_limit(m, args.h):.12g}")
    print(f"{'N':>6} {'count':>14} {'|count-2|':>12} {'err':>9} {'sec':>7}")
    for n in (int(v) for v in args.N.split(",")):
        t0 = time.perf_counter()
        res = expected_count(m, args.h, n, rho_mode=args.rho_mode)
        dt = time.perf_counter() - t0
        print(f"{n:>6} {res.value:>14.8f} {abs(res.value - 2):>12.6f} {res.error_estimate:>9.1e} {dt:>7.2f}")


if __name__ == "__main__":
    main()
