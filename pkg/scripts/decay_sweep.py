"""Expected distance to |2> against time for kappa in {0, M/200, M/20}.

    python scripts/decay_sweep.py --n-traj 1000 --out out/decay_sweep

Writes one ensemble.csv per decay rate and prints the terminal values.
"""

import argparse
from pathlib import Path

from photon_feedback import cli, ensemble
from photon_feedback.config import load_scenario
from photon_feedback.ensemble import EnsembleSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="out/decay_sweep")
    args = ap.parse_args()

    spec = load_scenario("fig3", seed=args.seed).ensemble
    spec = EnsembleSpec(base=spec.base, n_traj=args.n_traj, master_seed=spec.master_seed,
                        kappa_sweep=spec.kappa_sweep, decimation=spec.decimation)
    out = Path(args.out)
    print(f"{'kappa/M':>8} {'E[D](10)':>10} {'SE':>9} {'success':>8} {'invalid':>8} {'monotone':>9}")
    for kappa, stats in ensemble.kappa_sweep(spec, workers=args.workers):
        sub = out / f"kappa_{kappa:g}"
        sub.mkdir(parents=True, exist_ok=True)
        cli.write_csv(sub / "ensemble.csv", cli.ENSEMBLE_HEADER,
                      [stats.times, stats.mean_distance, stats.se_distance, stats.mean_n, stats.se_n])
        mono = ensemble.monotonicity_report(stats).passed
        print(f"{kappa:8g} {stats.mean_distance[-1]:10.3e} {stats.se_distance[-1]:9.2e} "
              f"{stats.success_rate:8.3f} {stats.n_invalid:8d} {str(mono):>9}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
