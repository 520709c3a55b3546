"""Type-I error and p-value uniformity of each CI test under its null model.

    python3 scripts/calibration.py --reps 1000 --seed 0
"""

import argparse
import time

import numpy as np

from dmcd.experiments import ks_uniform_pvalue, null_p_values

SETTINGS = {"partial_correlation": 500, "chi_squared": 500, "residual_pillai": 1000}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=1000)
    parser.add_argument("--pillai-reps", type=int, default=500)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tests", nargs="+", default=list(SETTINGS), choices=list(SETTINGS))
    args = parser.parse_args()

    print(f"{'test':<22}{'reps':>6}{'N':>7}{'type-I':>9}{'KS p':>9}{'secs':>8}")
    for test in args.tests:
        reps = args.pillai_reps if test == "residual_pillai" else args.reps
        t0 = time.perf_counter()
        p = null_p_values(test, reps, SETTINGS[test], seed=args.seed)
        rate = float(np.mean(p <= args.alpha))
        print(f"{test:<22}{reps:>6}{SETTINGS[test]:>7}{rate:>9.3f}{ks_uniform_pvalue(p):>9.3f}{time.perf_counter() - t0:>8.1f}")


if __name__ == "__main__":
    main()
