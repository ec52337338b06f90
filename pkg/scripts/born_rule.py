"""Open-loop collapse statistics: outcome histogram against Poisson(2).

    python scripts/born_rule.py --n-traj 2000
"""

import argparse
import math

import numpy as np

from photon_feedback import ensemble
from photon_feedback.config import load_scenario
from photon_feedback.ensemble import EnsembleSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=2000)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    spec = load_scenario("born").ensemble
    spec = EnsembleSpec(base=spec.base, n_traj=args.n_traj, master_seed=spec.master_seed, decimation=spec.decimation)
    stats = ensemble.run_ensemble(spec, workers=args.workers)
    n = sum(stats.outcome_counts.values())
    print(f"collapsed {n} / valid {stats.n_valid} / total {stats.n_traj}")
    print(f"{'n':>3} {'count':>6} {'expected':>9}")
    for k in range(max(stats.outcome_counts) + 1):
        expected = n * math.exp(-2) * 2**k / math.factorial(k)
        print(f"{k:3d} {stats.outcome_counts.get(k, 0):6d} {expected:9.1f}")
    drift = np.abs(stats.mean_n[1:] - stats.mean_n[0]) / stats.se_n[1:]
    print(f"largest drift of the ensemble mean <n>: {drift.max():.2f} standard errors")


if __name__ == "__main__":
    main()
