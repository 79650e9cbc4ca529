"""Write the exact gamma = 2 shear solution and some characteristics for three lambdas.

Usage: python3 demos/self_similar_curves.py [out_dir]
"""

import math
import sys
from pathlib import Path

import numpy as np

from granular_jko.analytic import (
    SelfSimilarParams,
    classify_threshold,
    write_characteristics_csv,
    write_selfsimilar_csv,
)


def main(out_dir="self_similar"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rho0 = 1 / math.sqrt(240)
    for lam in (200.0, 400.0):
        p = SelfSimilarParams(rho0=rho0, m0=1 / math.sqrt(2 * math.pi), b0=-10.0, lam=lam)
        times = np.linspace(0.0, 0.99 * p.T, 200)
        write_selfsimilar_csv(out / f"curves_lam{lam:g}.csv", p, times)
        write_characteristics_csv(out / f"characteristics_lam{lam:g}.csv", p,
                                  [(-0.05, 0.6), (-0.05, 1.0), (0.05, -0.6)], times)
        print(f"lambda={lam:g}: {classify_threshold(lam, rho0, p.T).value}, T={p.T:g}")
    print(f"threshold lambda = 2/(rho0 T) = {2 / (rho0 * 0.1):.2f}; files in {out}/")


if __name__ == "__main__":
    main(*sys.argv[1:])
