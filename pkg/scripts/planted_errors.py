"""Audit drafts with planted errors: truth plus two spurious edges minus one true edge.

    python3 scripts/planted_errors.py --seeds 20 --k 8 --n 5000
"""

import argparse

import numpy as np

from dmcd.experiments import planted_error_trial


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--edge-prob", type=float, default=0.3)
    parser.add_argument("--alpha", type=float, default=0.05)
    args = parser.parse_args()

    outcomes = []
    print(f"{'seed':>4}  {'spurious flagged':<18}{'removed flagged':<17}{'false flags':>12}  pi0")
    for seed in range(args.seeds):
        o = planted_error_trial(seed, k=args.k, n=args.n, edge_prob=args.edge_prob, alpha=args.alpha)
        outcomes.append(o)
        hits = "".join("x" if h else "." for h in o.spurious_flagged)
        print(f"{seed:>4}  {hits:<18}{str(o.removed_flagged):<17}{o.false_flags:>5}/{o.correct_pairs:<6}  {o.report.pi0:.3f}")

    spurious = np.mean([h for o in outcomes for h in o.spurious_flagged])
    removed = np.mean([o.removed_flagged for o in outcomes])
    false = np.mean([o.false_flag_rate for o in outcomes])
    print(f"\nspurious edges flagged: {spurious:.3f}")
    print(f"removed pair flagged missing: {removed:.3f}")
    print(f"mean false-flag rate on correct pairs: {false:.3f}")


if __name__ == "__main__":
    main()
