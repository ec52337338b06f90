"""One closed-loop trajectory preparing |2> from vacuum, with Q-function snapshots.

    python scripts/closed_loop_trajectory.py --seed 2 --out out/closed_loop
"""

import argparse
from pathlib import Path

from photon_feedback import cli, qfunc
from photon_feedback.config import load_scenario
from photon_feedback.sme import simulate_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="out/closed_loop")
    args = ap.parse_args()

    params = load_scenario("fig2", seed=args.seed).sim
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec = simulate_trajectory(params)
    cli.write_csv(out / "trajectory.csv", cli.TRAJECTORY_HEADER,
                  [rec.times, rec.dy, rec.n_est, rec.n_var, rec.distance, rec.drive])

    print(f"seed={params.seed} valid={rec.valid} {rec.reason}")
    print(f"{'Mt':>6} {'<n>':>8} {'Var(n)':>10} {'D':>10} {'P(n*)':>8}")
    for t, rho in rec.snapshot_states:
        grid = qfunc.q_function(rho)
        qfunc.write_qgrid(out / f"qfunc_Mt_{t:g}.txt", grid)
        p = qfunc.photon_distribution(rho)
        n = p @ range(len(p))
        var = p @ [k * k for k in range(len(p))] - n * n
        d = qfunc.distance(rho, params.n_star).value
        print(f"{t:6g} {n:8.4f} {var:10.3e} {d:10.3e} {p[params.n_star]:8.5f}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
