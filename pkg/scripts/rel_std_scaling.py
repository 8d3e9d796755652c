"""Large-n behaviour of the relative standard deviation for c = 1/(1 + n^alpha).

Prints rel_std on a dimension grid together with the local log-log slope, so
the critical exponent (where rel_std neither grows nor vanishes) is visible.
"""

import argparse
import math

import numpy as np

from csa_lab import OrderStatSpec, ScalingSpec, moments_quadrature
from csa_lab.theory import relative_std_curve


def main():
    ap = argparse.ArgumentParser(description="rel_std scaling in n for c = 1/(1+n^alpha)")
    ap.add_argument("--lambda", dest="lam", type=int, default=8)
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.25, 1 / 3, 0.5, 1.0])
    args = ap.parse_args()

    m1 = moments_quadrature(OrderStatSpec(args.lam, 1), 1).m1
    print(f"1/(sqrt(2) m1^2) = {1 / (math.sqrt(2) * m1 * m1):.4f}")
    grid = tuple(int(v) for v in np.unique(np.geomspace(10, 1e7, 13).astype(int)))
    for alpha in args.alpha:
        rows = relative_std_curve(ScalingSpec(alpha, grid), args.lam)
        print(f"alpha={alpha:.4g}")
        for a, b in zip(rows, rows[1:]):
            slope = math.log(b.rel_std / a.rel_std) / math.log(b.n / a.n)
            print(f"  n={b.n:<9d} c={b.c:.3e} rel_std={b.rel_std:.4f} slope={slope:+.3f}")


if __name__ == "__main__":
    main()
