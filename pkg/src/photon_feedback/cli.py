"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 invalidated trajectory
(truncation overflow or positivity breach) or an ensemble with no valid
trajectory.  Files are written under a ``.partial`` name and renamed once
complete.  Ensembles use ``$PHOTON_FB_WORKERS`` processes (default: CPU count).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import cavity_qed, ensemble, fock, qfunc
from .config import ConfigError, bundled_scenarios, load_scenario
from .sme import InitialState, simulate_trajectory

log = logging.getLogger("photon_feedback")

EXIT_OK, EXIT_CONFIG, EXIT_INVALID = 0, 2, 3
TRAJECTORY_HEADER = "t,dy,n_est,n_var,distance,drive"
ENSEMBLE_HEADER = "t,mean_distance,se_distance,mean_n,se_n"

PLOT_STUB = '''"""Plot data written by photon-fb; edit freely."""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
traj = out / "trajectory.csv"
if traj.exists():
    d = np.genfromtxt(traj, delimiter=",", names=True)
    fig, ax = plt.subplots(3, 1, sharex=True, figsize=(6, 7))
    ax[0].plot(d["t"], np.cumsum(d["dy"]))
    ax[0].set_ylabel("y_t")
    sd = np.sqrt(np.clip(d["n_var"], 0, None))
    ax[1].plot(d["t"], d["n_est"])
    ax[1].fill_between(d["t"], d["n_est"] - sd, d["n_est"] + sd, alpha=0.3)
    ax[1].set_ylabel("<n>")
    ax[2].plot(d["t"], d["distance"])
    ax[2].set_ylabel("D")
    ax[2].set_xlabel("M t")
for ens in sorted(out.glob("**/ensemble.csv")):
    d = np.genfromtxt(ens, delimiter=",", names=True)
    plt.figure("E[D]")
    plt.plot(d["t"], d["mean_distance"], label=str(ens.parent.name))
    plt.xlabel("M t")
    plt.ylabel("E[D]")
    plt.legend()
for q in sorted(out.glob("qfunc_*.txt")):
    header = q.open().readline()[2:]
    fields = dict(p.strip().split("=", 1) for p in header.split(";"))
    x = np.array(fields["x"].split(","), float)
    y = np.array(fields["y"].split(","), float)
    plt.figure(q.stem)
    plt.pcolormesh(x, y, np.loadtxt(q), shading="auto")
    plt.gca().set_aspect("equal")
    plt.title(q.stem)
plt.show()
'''


def _write_text(path: Path, text: str) -> None:
    partial = path.with_name(path.name + ".partial")
    partial.write_text(text)
    partial.replace(path)


def _fmt(v) -> str:
    return f"{v:.17g}"


def write_csv(path: Path, header: str, columns) -> None:
    lines = [header] + [",".join(_fmt(v) for v in row) for row in zip(*columns)]
    _write_text(path, "\n".join(lines) + "\n")


def read_csv(path: Path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line for line in fh if line.strip()]
    if not rows:
        return {name: np.empty(0) for name in header}
    data = np.loadtxt(rows, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def _kv_block(d: dict, prefix: str = "") -> str:
    lines = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and v:
            lines.append(_kv_block(v, key + "."))
        elif isinstance(v, dict):
            lines.append(f"{key}=none")
        elif isinstance(v, float):
            lines.append(f"{key}={_fmt(v)}")
        else:
            lines.append(f"{key}={v}")
    return "\n".join(lines)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _write_json(path: Path, data: dict) -> None:
    _write_text(path, json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n")


def _snapshot_name(t: float) -> str:
    return f"qfunc_Mt_{t:g}.txt"


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config, args.set, seed=args.seed)
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.sim
    rec = simulate_trajectory(params)
    write_csv(
        out / "trajectory.csv",
        TRAJECTORY_HEADER,
        [rec.times, rec.dy, rec.n_est, rec.n_var, rec.distance, rec.drive],
    )
    for t, rho in rec.snapshot_states:
        qfunc.write_qgrid(out / _snapshot_name(t), qfunc.q_function(rho))
    _write_text(out / "plot.py", PLOT_STUB)
    summary = {
        "scenario": cfg.name,
        "seed": params.seed,
        "n_star": params.n_star,
        "valid": rec.valid,
        "reason": rec.reason or "none",
        "t_end": float(rec.times[-1]),
        "final_fidelity": qfunc.number_fidelity(rec.final_state, params.n_star),
        "final_distance": float(rec.distance[-1]),
        "final_n": float(rec.n_est[-1]),
        "final_var": float(rec.n_var[-1]),
    }
    _write_json(out / "summary.json", summary)
    print(_kv_block(summary))
    return EXIT_OK if rec.valid else EXIT_INVALID


def _stats_summary(stats: ensemble.EnsembleStats) -> dict:
    mono = ensemble.monotonicity_report(stats) if stats.n_valid >= 500 else None
    return {
        "kappa": stats.kappa,
        "n_traj": stats.n_traj,
        "n_invalid": stats.n_invalid,
        "invalid_reasons": stats.invalid_reasons,
        "success_rate": stats.success_rate,
        "terminal_mean_distance": float(stats.mean_distance[-1]),
        "terminal_se_distance": float(stats.se_distance[-1]),
        "monotone_expected_distance": "n/a" if mono is None else mono.passed,
    }


def _write_stats(out: Path, stats: ensemble.EnsembleStats) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "ensemble.csv",
        ENSEMBLE_HEADER,
        [stats.times, stats.mean_distance, stats.se_distance, stats.mean_n, stats.se_n],
    )
    ks = sorted(stats.outcome_counts)
    write_csv(
        out / "histogram.csv",
        "n,count,frequency",
        [ks, [stats.outcome_counts[k] for k in ks], [stats.outcome_histogram[k] for k in ks]],
    )
    summary = _stats_summary(stats)
    _write_json(out / "summary.json", summary)
    return summary


def cmd_ensemble(args) -> int:
    overrides = list(args.set)
    if args.n_traj is not None:
        overrides.append(f"ensemble.n_traj={args.n_traj}")
    cfg = load_scenario(args.config, overrides, seed=args.seed)
    if cfg.ensemble is None:
        raise ConfigError(f"scenario {cfg.name!r} has no [ensemble] section")
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.ensemble
    try:
        if spec.kappa_sweep:
            results = ensemble.kappa_sweep(spec, workers=args.workers)
            rows = []
            for kappa, stats in results:
                summary = _write_stats(out / f"kappa_{kappa:g}", stats)
                print(_kv_block(summary, prefix=f"kappa_{kappa:g}."))
                rows.append(stats)
            write_csv(
                out / "sweep.csv",
                "kappa,terminal_mean_distance,terminal_se_distance,success_rate,n_invalid",
                [
                    [s.kappa for s in rows],
                    [s.mean_distance[-1] for s in rows],
                    [s.se_distance[-1] for s in rows],
                    [s.success_rate for s in rows],
                    [s.n_invalid for s in rows],
                ],
            )
        else:
            stats = ensemble.run_ensemble(spec, workers=args.workers)
            print(_kv_block(_write_stats(out, stats)))
    except ensemble.EnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _write_text(out / "plot.py", PLOT_STUB)
    return EXIT_OK


def cmd_feasibility(args) -> int:
    cfg = load_scenario(args.config, args.set)
    if cfg.qed is None:
        raise ConfigError(f"scenario {cfg.name!r} has no [qed] section")
    reports = {k: r.as_dict() for k, r in cavity_qed.feasibility_both(cfg.qed).items()}
    if cfg.qed.L and cfg.qed.finesse:
        reports["geometry"] = {"linewidth_Hz": cavity_qed.cavity_linewidth(cfg.qed.L, cfg.qed.finesse)}
    if args.json:
        print(json.dumps(_json_safe(reports), indent=2, sort_keys=True))
    else:
        print(_kv_block(reports))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "feasibility.json", reports)
    return EXIT_OK


def cmd_qfunc(args) -> int:
    try:
        state = InitialState.parse(args.state)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n_max = args.n_max if args.n_max is not None else fock.HilbertConfig.for_target(0, state.mean_photons()).n_max
    rho = state.density_matrix(fock.HilbertConfig(n_max))
    try:
        grid = qfunc.q_function(rho, qfunc.GridSpec(points=args.points, extent=args.extent))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    qfunc.write_qgrid(out, grid)
    centre = grid.values[len(grid.y) // 2, len(grid.x) // 2]
    print(f"state={state}\nn_max={n_max}\npoints={args.points}\ncenter_value={_fmt(centre)}\nfile={out}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    print("\n".join(bundled_scenarios()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photon-fb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("config", help="scenario file or bundled scenario name")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("--out", help="output directory (default: from the scenario)")

    p = sub.add_parser("simulate", help="integrate one trajectory")
    scenario_args(p)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="run an ensemble or kappa sweep")
    scenario_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("feasibility", help="measurement strength from cavity-QED parameters")
    scenario_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("qfunc", help="Q-function matrix of a named state")
    p.add_argument("state", help="vacuum | number:M | coherent:AMP")
    p.add_argument("--n-max", type=int)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--extent", type=float)
    p.add_argument("--out", default="qfunc.txt")
    p.set_defaults(func=cmd_qfunc)

    p = sub.add_parser("scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
