"""Seed-deterministic Monte Carlo ensembles of feedback trajectories.

Trajectory ``i`` always consumes the Philox stream ``(master_seed, i)`` and
trajectories are integrated in fixed chunks of ``CHUNK_SIZE`` consecutive
indices.  Chunk composition never depends on the worker count, so the
aggregated statistics are bit-identical however the chunks are scheduled.
"""

from __future__ import annotations

import logging
import os
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .sme import SimParams, simulate_batch

log = logging.getLogger(__name__)

CHUNK_SIZE = 100
COLLAPSE_VAR = 1e-3
SUCCESS_FIDELITY = 0.99
WORKERS_ENV = "PHOTON_FB_WORKERS"


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    base: SimParams
    n_traj: int
    master_seed: int | None = None
    kappa_sweep: tuple = ()
    decimation: int | None = None

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if any(k < 0 for k in self.kappa_sweep):
            raise ValueError("kappa sweep values must be non-negative")

    @property
    def params(self) -> SimParams:
        p = self.base
        if self.master_seed is not None:
            p = p.replace(seed=self.master_seed)
        if self.decimation is not None:
            p = p.replace(record_stride=self.decimation)
        return p


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_distance: np.ndarray
    se_distance: np.ndarray
    mean_n: np.ndarray
    se_n: np.ndarray
    outcome_histogram: dict
    outcome_counts: dict
    success_rate: float
    n_invalid: int
    n_traj: int
    kappa: float = 0.0
    # per-trajectory end points, in index order; NaN for invalid trajectories
    valid: np.ndarray = field(default=None, repr=False)
    final_n: np.ndarray = field(default=None, repr=False)
    final_var: np.ndarray = field(default=None, repr=False)
    final_fidelity: np.ndarray = field(default=None, repr=False)
    invalid_reasons: dict = field(default_factory=dict)

    @property
    def n_valid(self) -> int:
        return self.n_traj - self.n_invalid


@dataclass
class MonotonicityReport:
    passed: bool
    violations: list
    max_excess: float
    n_se: float


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_chunk(args):
    params, indices = args
    batch = simulate_batch(params, indices)
    fin = batch.final_states
    diag = np.real(np.einsum("bii->bi", fin))
    n = np.arange(diag.shape[1])
    mean = diag @ n
    return {
        "times": batch.times,
        "distance": batch.distance,
        "n_est": batch.n_est,
        "valid": batch.valid,
        "reasons": batch.reasons,
        "final_n": mean,
        "final_var": diag @ n**2 - mean**2,
        "final_fidelity": diag[:, params.n_star],
    }


def _chunks(n_traj: int):
    return [tuple(range(s, min(s + CHUNK_SIZE, n_traj))) for s in range(0, n_traj, CHUNK_SIZE)]


def _map(params: SimParams, n_traj: int, workers: int):
    jobs = [(params, idx) for idx in _chunks(n_traj)]
    if workers <= 1 or len(jobs) == 1:
        return [_run_chunk(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_chunk, jobs))


def _mean_se(x: np.ndarray):
    mean = x.mean(axis=0)
    if x.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])


def run_ensemble(spec: EnsembleSpec, workers: int | None = None) -> EnsembleStats:
    """Run ``spec.n_traj`` trajectories and aggregate over the valid ones."""
    params = spec.params
    workers = default_workers() if workers is None else workers
    parts = _map(params, spec.n_traj, workers)

    valid = np.concatenate([p["valid"] for p in parts])
    reasons = [r for p in parts for r in p["reasons"]]
    if not valid.any():
        raise EnsembleError(f"all {spec.n_traj} trajectories invalid: {Counter(reasons)}")
    dist = np.concatenate([p["distance"] for p in parts])[valid]
    n_est = np.concatenate([p["n_est"] for p in parts])[valid]

    def finals(key):
        out = np.concatenate([p[key] for p in parts])
        return np.where(valid, out, np.nan)

    final_n, final_var, final_fid = finals("final_n"), finals("final_var"), finals("final_fidelity")
    n_valid = int(valid.sum())
    collapsed = valid & (final_var < COLLAPSE_VAR)
    counts = Counter(int(k) for k in np.rint(final_n[collapsed]))
    counts = dict(sorted(counts.items()))

    mean_d, se_d = _mean_se(dist)
    mean_n, se_n = _mean_se(n_est)
    stats = EnsembleStats(
        times=parts[0]["times"],
        mean_distance=mean_d,
        se_distance=se_d,
        mean_n=mean_n,
        se_n=se_n,
        outcome_histogram={k: v / n_valid for k, v in counts.items()},
        outcome_counts=counts,
        success_rate=float(np.sum(final_fid[valid] >= SUCCESS_FIDELITY) / n_valid),
        n_invalid=int(spec.n_traj - n_valid),
        n_traj=spec.n_traj,
        kappa=params.kappa,
        valid=valid,
        final_n=final_n,
        final_var=final_var,
        final_fidelity=final_fid,
        invalid_reasons=dict(Counter(r for r in reasons if r)),
    )
    if stats.n_invalid:
        log.info("kappa=%g: %d/%d trajectories invalid %s", params.kappa, stats.n_invalid, spec.n_traj, stats.invalid_reasons)
    return stats


def kappa_sweep(spec: EnsembleSpec, workers: int | None = None) -> list:
    """One ensemble per decay rate, all on the same trajectory streams.

    Sharing the master seed gives common random numbers across the sweep,
    which sharpens comparisons between decay rates.
    """
    if not spec.kappa_sweep:
        raise ValueError("kappa_sweep is empty")
    out = []
    for kappa in spec.kappa_sweep:
        sub = EnsembleSpec(
            base=spec.base.replace(kappa=float(kappa)),
            n_traj=spec.n_traj,
            master_seed=spec.master_seed,
            decimation=spec.decimation,
        )
        out.append((float(kappa), run_ensemble(sub, workers=workers)))
    return out


def monotonicity_report(stats: EnsembleStats, n_se: float = 2.0) -> MonotonicityReport:
    """Flag every recorded step where ``E[D]`` rises by more than ``n_se`` standard errors."""
    if stats.n_valid < 500:
        warnings.warn(
            f"monotonicity check on {stats.n_valid} trajectories; 500 or more are expected",
            stacklevel=2,
        )
    rise = np.diff(stats.mean_distance)
    band = n_se * np.maximum(stats.se_distance[1:], stats.se_distance[:-1])
    excess = rise - band
    violations = [int(i) + 1 for i in np.flatnonzero(excess > 0)]
    return MonotonicityReport(
        passed=not violations,
        violations=violations,
        max_excess=float(excess.max()) if len(excess) else 0.0,
        n_se=n_se,
    )
