"""Curvature and WDVV defect along the alpha pencil over random families.

Prints, for each alpha, the largest curvature component over the sweep and
the largest deviation from the predicted multiple (c - c^2) of the WDVV
defect, c = (1 + alpha) / 2.

    python scripts/pencil_sweep.py --count 100 --seed 0
"""

import argparse

import numpy as np

from statfrob.expfam import fisher_metric, random_family, skewness_tensor
from statfrob.frobenius import flatness_residual, wdvv_curvature_link_residual, wdvv_residual


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--alphas", type=float, nargs="+", default=[-1.0, -0.5, 0.0, 0.5, 1.0])
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    points = []
    for _ in range(args.count):
        fam = random_family(rng)
        points.append((fam, rng.uniform(-2.0, 2.0, fam.n)))

    wdvv = [wdvv_residual(fisher_metric(f, b), skewness_tensor(f, b)) for f, b in points]
    multi = [w for (f, _), w in zip(points, wdvv) if f.n >= 2]
    print(f"families: {args.count} ({len(multi)} with n >= 2), seed {args.seed}")
    print(f"WDVV defect (Fisher metric): max {max(wdvv):.3e}, min over n>=2 {min(multi):.3e}")
    print(f"{'alpha':>6} {'c - c^2':>8} {'max |R|':>11} {'link residual':>14}")
    for alpha in args.alphas:
        c = 0.5 * (1.0 + alpha)
        curv = max(flatness_residual(f, b, alpha) for f, b in points)
        link = max(wdvv_curvature_link_residual(f, b, alpha) for f, b in points)
        print(f"{alpha:6.2f} {c - c * c:8.4f} {curv:11.3e} {link:14.3e}")


if __name__ == "__main__":
    main()
