"""Feedback-controlled stochastic master equation for cavity photon number.

The conditioned cavity state obeys

    d rho = -i [G e_t X, rho] dt + M D[n] rho dt + kappa D[a] rho dt
            + sqrt(M) H[n] rho (dy - 2 eta sqrt(M) <n> dt)

with photocurrent ``dy = 2 eta sqrt(M) <n> dt + sqrt(eta) dW`` and error signal
``e_t = n* - <n>_t``.  The simulated state *is* the filter state: each step
draws ``dW``, synthesizes ``dy`` from it, and conditions on that record.

Two first-order integrators are provided:

``"kraus"`` (default)
    Operator splitting into three exactly solvable, completely positive
    maps applied in sequence: the feedback unitary ``exp(-i G e X dt)``, the
    diagonal QND measurement update for the record increment, and the
    amplitude-damping channel.  Positivity holds by construction.
``"euler"``
    Literal Euler-Maruyama on the equation above.  Its increment has a
    negative eigenvalue of order ``Var(n) (dt - dW^2)`` whenever
    ``dW^2 > dt``, so it breaches a 1e-6 positivity gate at any practical step
    size; it is kept as a reference for the drift/diffusion terms.

Both schemes Hermitize and renormalize after every step.  Trajectories are
integrated in batches so that many independent records share each numpy
call; a single trajectory is a batch of one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import fock, qfunc

log = logging.getLogger(__name__)

TAIL_TOL = 1e-6
POSITIVITY_BREACH = -1e-6
MAX_RATE_DT = 1e-2
MIN_HEADROOM = 2


@dataclass(frozen=True)
class InitialState:
    kind: str = "vacuum"
    value: complex = 0.0

    def __post_init__(self):
        if self.kind not in ("vacuum", "coherent", "number"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")

    @classmethod
    def vacuum(cls) -> "InitialState":
        return cls("vacuum", 0.0)

    @classmethod
    def coherent(cls, amp: complex) -> "InitialState":
        return cls("coherent", complex(amp))

    @classmethod
    def number(cls, m: int) -> "InitialState":
        return cls("number", int(m))

    @classmethod
    def parse(cls, text: str) -> "InitialState":
        """Parse ``"vacuum"``, ``"number:3"`` or ``"coherent:1.414"`` (complex ok)."""
        kind, _, arg = text.strip().partition(":")
        if kind == "vacuum" and not arg:
            return cls.vacuum()
        if kind == "number" and arg:
            return cls.number(int(arg))
        if kind == "coherent" and arg:
            return cls.coherent(complex(arg.replace(" ", "")))
        raise ValueError(f"cannot parse initial state {text!r}")

    def __str__(self) -> str:
        if self.kind == "vacuum":
            return "vacuum"
        if self.kind == "number":
            return f"number:{int(abs(self.value))}"
        v = complex(self.value)
        return f"coherent:{v.real!r}" if v.imag == 0 else f"coherent:{v!r}"

    def mean_photons(self) -> float:
        if self.kind == "coherent":
            return abs(self.value) ** 2
        if self.kind == "number":
            return float(abs(self.value))
        return 0.0

    def density_matrix(self, cfg: fock.HilbertConfig) -> np.ndarray:
        if self.kind == "coherent":
            return fock.coherent_state(self.value, cfg)
        if self.kind == "number":
            return fock.number_state(int(abs(self.value)), cfg)
        return fock.number_state(0, cfg)


@dataclass(frozen=True)
class SimParams:
    """Closed-loop rates and numerics.

    Rates (``M``, ``kappa``, ``G``) and times (``dt``, ``t_final``) share one
    arbitrary time base; with ``M = 1`` the clock is ``M t``.
    """

    M: float = 1.0
    kappa: float = 0.0
    eta: float = 1.0
    G: float = 20.0
    n_star: int = 2
    dt: float = 1e-3
    t_final: float = 10.0
    n_max: int | None = None
    seed: int = 0
    initial_state: InitialState = InitialState()
    feedback_enabled: bool = True
    scheme: str = "kraus"
    record_stride: int = 1
    snapshot_times: tuple = ()
    positivity_stride: int = 100

    def __post_init__(self):
        if self.M < 0 or self.kappa < 0:
            raise ValueError("rates M and kappa must be non-negative")
        if not 0 < self.eta <= 1:
            raise ValueError(f"detector efficiency must satisfy 0 < eta <= 1, got {self.eta}")
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.dt * max(self.M, self.kappa) > MAX_RATE_DT:
            raise ValueError(
                f"dt * max(M, kappa) = {self.dt * max(self.M, self.kappa):.3g} exceeds {MAX_RATE_DT}"
            )
        if int(self.n_star) != self.n_star or self.n_star < 0:
            raise ValueError(f"n_star must be a non-negative integer, got {self.n_star}")
        if self.n_star > self.cfg.n_max - MIN_HEADROOM:
            raise ValueError(f"n_star={self.n_star} leaves no headroom below n_max={self.cfg.n_max}")
        if self.scheme not in ("kraus", "euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_stride < 1 or self.n_steps % self.record_stride:
            raise ValueError("record_stride must be a positive divisor of the step count")
        if abs(self.n_steps * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ValueError("t_final must be an integer multiple of dt")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_final + 1e-12:
                raise ValueError(f"snapshot time {t} outside [0, t_final]")

    @property
    def cfg(self) -> fock.HilbertConfig:
        if self.n_max is not None:
            return fock.HilbertConfig(self.n_max)
        return fock.HilbertConfig.for_target(self.n_star, self.initial_state.mean_photons())

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> "SimParams":
        return replace(self, **changes)


@dataclass
class TrajectoryRecord:
    """Scalar time series of one trajectory.

    Row ``k`` holds the state statistics at ``times[k]``, the feedback drive
    ``G e`` applied from that time on, and the photocurrent accumulated since
    the previous row (zero for the first row).
    """

    times: np.ndarray
    dy: np.ndarray
    n_est: np.ndarray
    n_var: np.ndarray
    distance: np.ndarray
    drive: np.ndarray
    final_state: np.ndarray
    valid: bool = True
    reason: str = ""
    snapshot_states: list = field(default_factory=list)
    index: int = 0


@dataclass
class StepResult:
    rho_next: np.ndarray
    dy: float
    e: float
    diagnostics: dict


@dataclass
class BatchResult:
    """Per-trajectory series for a batch; rows follow the ``TrajectoryRecord`` layout."""

    times: np.ndarray
    dy: np.ndarray
    n_est: np.ndarray
    n_var: np.ndarray
    distance: np.ndarray
    drive: np.ndarray
    final_states: np.ndarray
    valid: np.ndarray
    reasons: list
    failed_row: np.ndarray
    snapshots: list
    indices: tuple


def error_signal(n_star: int, rho: np.ndarray) -> float:
    n = np.arange(np.shape(rho)[0], dtype=float)
    return float(n_star - n @ np.real(np.diagonal(rho)))


def feedback_hamiltonian(G: float, e: float, cfg: fock.HilbertConfig) -> np.ndarray:
    """``G e X``: drive of the amplitude quadrature proportional to the error."""
    return (G * e) * fock.operators(cfg).x


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based (Philox) stream for trajectory ``index`` of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def trajectory_noise(seed: int, index: int, n_steps: int, dt: float) -> np.ndarray:
    """Brownian increments ``dW`` (variance ``dt``) for one trajectory."""
    return trajectory_rng(seed, index).standard_normal(n_steps) * math.sqrt(dt)


class _Engine:
    """Precomputed per-parameter data and the batched single-step update."""

    def __init__(self, params: SimParams):
        self.params = params
        cfg = params.cfg
        ops = fock.operators(cfg)
        self.dim = cfg.dim
        self.n = ops.n_diag
        self.x = ops.x.real
        self.x_eigvals = ops.x_eigvals
        self.V = ops.x_eigvecs
        self.weights = qfunc.distance_weights(params.n_star, cfg.n_max)
        p = params
        dn = self.n[:, None] - self.n[None, :]
        # unobserved share of the QND back-action: exp((1 - eta) M D[n] dt)
        self.dephase = np.exp(-0.5 * (1.0 - p.eta) * p.M * dn**2 * p.dt) if p.eta < 1 else None
        self.gap2 = dn**2
        self.nsum = self.n[:, None] + self.n[None, :]
        self.decay_blocks = self._decay_blocks() if p.kappa > 0 else []

    def _decay_blocks(self):
        """Kraus weights of the exact loss channel over one step.

        ``A_k |m> = sqrt(C(m,k) (1-p)^(m-k) p^k) |m-k>`` with ``p = 1 - exp(-kappa dt)``;
        block ``k`` holds ``c_k(i+k) c_k(j+k)`` so that
        ``rho'[i, j] += block_k[i, j] * rho[i+k, j+k]``.
        """
        p = -math.expm1(-self.params.kappa * self.params.dt)
        blocks = []
        for k in range(self.dim):
            m = np.arange(k, self.dim)
            logc = np.array(
                [math.lgamma(j + 1) - math.lgamma(k + 1) - math.lgamma(j - k + 1) for j in m]
            ) + (m - k) * math.log1p(-p) + (k * math.log(p) if k else 0.0)
            c = np.exp(0.5 * logc)
            if k and c.max() < 1e-17:
                break
            blocks.append(np.outer(c, c))
        return blocks

    def stats(self, R: np.ndarray):
        diag = np.real(np.einsum("bii->bi", R))
        mean = diag @ self.n
        var = diag @ self.n**2 - mean**2
        dist = 1.0 - diag @ self.weights
        return diag, mean, var, dist

    def _unitary(self, R: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """``U R U^+`` with ``U = exp(-i theta X)`` per batch element, via X's eigenbasis."""
        B, d = R.shape[0], self.dim
        V = self.V
        # W = V^T R V, with R V and V^T (R V) as single large products
        W = (R.reshape(B * d, d) @ V).reshape(B, d, d)
        W = np.swapaxes((np.swapaxes(W, 1, 2).reshape(B * d, d) @ V).reshape(B, d, d), 1, 2)
        ph = np.exp(-1j * theta[:, None] * self.x_eigvals[None, :])
        W *= ph[:, :, None] * ph.conj()[:, None, :]
        W = (W.reshape(B * d, d) @ V.T).reshape(B, d, d)
        return np.swapaxes((np.swapaxes(W, 1, 2).reshape(B * d, d) @ V.T).reshape(B, d, d), 1, 2)

    def _decay(self, R: np.ndarray) -> np.ndarray:
        d = self.dim
        out = R * self.decay_blocks[0]
        for k, blk in enumerate(self.decay_blocks[1:], start=1):
            out[:, : d - k, : d - k] += blk * R[:, k:, k:]
        return out

    def _dissipator_a(self, R: np.ndarray) -> np.ndarray:
        d = self.dim
        sq = np.sqrt(self.n[1:])
        out = np.zeros_like(R)
        out[:, : d - 1, : d - 1] = sq[:, None] * sq[None, :] * R[:, 1:, 1:]
        return out - 0.5 * self.nsum * R

    def advance(self, R: np.ndarray, dW: np.ndarray, mean: np.ndarray, diagnose: bool = False):
        """One step for a batch; returns ``(R_next, dy, e, drift)``.

        ``mean`` is ``<n>`` of the incoming states.  ``drift`` holds the
        pre-renormalization trace deviation and, with ``diagnose``, the
        Hermiticity error before symmetrization.
        """
        p = self.params
        e = p.n_star - mean
        drive = p.G * e if p.feedback_enabled else np.zeros_like(e)
        dy = 2.0 * p.eta * math.sqrt(p.M) * mean * p.dt + math.sqrt(p.eta) * dW
        if p.scheme == "kraus":
            if np.any(drive != 0.0):
                R = self._unitary(R, drive * p.dt)
            else:
                R = R.copy()
            shift = np.zeros_like(mean)
            if p.M > 0:
                # record increment in units where the signal is 2 sqrt(eta M) <n> dt
                dY = dy / math.sqrt(p.eta)
                lk = math.sqrt(p.eta * p.M) * dY[:, None] * self.n[None, :] - p.eta * p.M * self.n**2 * p.dt
                shift = lk.max(axis=1)
                k = np.exp(lk - shift[:, None])
                R *= k[:, :, None] * k[:, None, :]
                if self.dephase is not None:
                    R *= self.dephase
            if self.decay_blocks:
                R = self._decay(R)
            tr = np.real(np.einsum("bii->b", R))
            trace_drift = np.abs(tr * np.exp(2.0 * shift) - 1.0)
        else:
            comm = -1j * drive[:, None, None] * (self.x @ R - R @ self.x)
            dR = comm * p.dt - 0.5 * p.M * self.gap2 * R * p.dt
            if p.kappa > 0:
                dR += p.kappa * self._dissipator_a(R) * p.dt
            innovation = dy - 2.0 * p.eta * math.sqrt(p.M) * mean * p.dt
            dR += math.sqrt(p.M) * (self.nsum[None] - 2.0 * mean[:, None, None]) * R * innovation[:, None, None]
            R = R + dR
            tr = np.real(np.einsum("bii->b", R))
            trace_drift = np.abs(tr - 1.0)
        R /= tr[:, None, None]
        Rh = np.conj(np.swapaxes(R, 1, 2))
        drift = {"trace": trace_drift}
        if diagnose:
            drift["hermiticity"] = np.abs(R - Rh).max(axis=(1, 2))
        return 0.5 * (R + Rh), dy, e, drift


@lru_cache(maxsize=16)
def _engine(params: SimParams) -> _Engine:
    return _Engine(params)


def step(rho: np.ndarray, params: SimParams, dW: float) -> StepResult:
    """Advance one conditioned state by ``params.dt`` given the increment ``dW``."""
    rho = np.asarray(rho, dtype=complex)
    eng = _engine(params)
    if rho.shape != (eng.dim, eng.dim):
        raise ValueError(f"state shape {rho.shape} does not match truncation dim {eng.dim}")
    _, mean, _, _ = eng.stats(rho[None])
    R, dy, e, drift = eng.advance(rho[None], np.array([float(dW)]), mean, diagnose=True)
    rho_next = R[0]
    diag = fock.state_diagnostics(rho_next)
    diagnostics = {
        "trace_drift": float(drift["trace"][0]),
        "hermiticity_drift": float(drift["hermiticity"][0]),
        "min_eig_estimate": diag["min_eig"],
        "tail_population": float(rho_next[-1, -1].real),
    }
    return StepResult(rho_next=rho_next, dy=float(dy[0]), e=float(e[0]), diagnostics=diagnostics)


def integrate_batch(params: SimParams, noise: np.ndarray, indices=None, keep_snapshots: bool = True) -> BatchResult:
    """Integrate ``len(noise)`` trajectories driven by the given increments.

    ``noise`` has shape ``(B, n_steps)``.  A trajectory is invalidated (and
    its failure row recorded) when the top Fock level holds more than 1e-6
    population or a positivity check finds an eigenvalue below -1e-6.
    """
    p = params
    noise = np.atleast_2d(np.asarray(noise, dtype=float))
    B, n_steps = noise.shape
    if n_steps != p.n_steps:
        raise ValueError(f"noise has {n_steps} steps, params require {p.n_steps}")
    indices = tuple(range(B)) if indices is None else tuple(indices)
    eng = _engine(p)
    d = eng.dim
    stride = p.record_stride
    n_rows = n_steps // stride + 1

    R = np.broadcast_to(p.initial_state.density_matrix(p.cfg), (B, d, d)).astype(complex)
    times = np.arange(n_rows) * (stride * p.dt)
    dy_rec = np.zeros((B, n_rows))
    n_rec = np.empty((B, n_rows))
    var_rec = np.empty((B, n_rows))
    dist_rec = np.empty((B, n_rows))
    drive_rec = np.empty((B, n_rows))
    valid = np.ones(B, dtype=bool)
    reasons = [""] * B
    failed_row = np.full(B, -1)
    snap_steps = {int(round(t / p.dt)): t for t in p.snapshot_times}
    snapshots = [[] for _ in range(B)]
    acc = np.zeros(B)
    gain = p.G if p.feedback_enabled else 0.0

    def invalidate(mask, why, row):
        for b in np.flatnonzero(mask & valid):
            valid[b] = False
            reasons[b] = why
            failed_row[b] = row

    for j in range(n_steps + 1):
        diag, mean, var, dist = eng.stats(R)
        row, at_row = divmod(j, stride)
        if at_row == 0:
            n_rec[:, row] = mean
            var_rec[:, row] = var
            dist_rec[:, row] = dist
            drive_rec[:, row] = gain * (p.n_star - mean) + 0.0
            if row > 0:
                dy_rec[:, row] = acc
                acc[:] = 0.0
        invalidate(diag[:, -1] > TAIL_TOL, "truncation overflow", row)
        if keep_snapshots and j in snap_steps:
            for b in range(B):
                snapshots[b].append((snap_steps[j], R[b].copy()))
        if j % p.positivity_stride == 0 or j == n_steps:
            min_eig = np.linalg.eigvalsh(R)[:, 0]
            invalidate(min_eig < POSITIVITY_BREACH, "positivity breach", row)
            invalidate(~np.isfinite(min_eig), "non-finite state", row)
            bad = ~np.isfinite(min_eig)
            if bad.any():
                R[bad] = np.eye(d) / d
        if j == n_steps:
            break
        R, dy, _, _ = eng.advance(R, noise[:, j], mean)
        acc += dy

    return BatchResult(
        times=times,
        dy=dy_rec,
        n_est=n_rec,
        n_var=var_rec,
        distance=dist_rec,
        drive=drive_rec,
        final_states=R,
        valid=valid,
        reasons=reasons,
        failed_row=failed_row,
        snapshots=snapshots,
        indices=indices,
    )


def simulate_batch(params: SimParams, indices, keep_snapshots: bool = False) -> BatchResult:
    """Integrate trajectories ``indices`` of the stream family ``params.seed``."""
    indices = tuple(indices)
    noise = np.stack([trajectory_noise(params.seed, i, params.n_steps, params.dt) for i in indices])
    return integrate_batch(params, noise, indices=indices, keep_snapshots=keep_snapshots)


def record_from_batch(batch: BatchResult, b: int) -> TrajectoryRecord:
    """Extract trajectory ``b``; invalid records are cut after the failing row."""
    stop = len(batch.times) if batch.valid[b] else batch.failed_row[b] + 1
    return TrajectoryRecord(
        times=batch.times[:stop].copy(),
        dy=batch.dy[b, :stop].copy(),
        n_est=batch.n_est[b, :stop].copy(),
        n_var=batch.n_var[b, :stop].copy(),
        distance=batch.distance[b, :stop].copy(),
        drive=batch.drive[b, :stop].copy(),
        final_state=batch.final_states[b].copy(),
        valid=bool(batch.valid[b]),
        reason=batch.reasons[b],
        snapshot_states=list(batch.snapshots[b]),
        index=batch.indices[b],
    )


def simulate_trajectory(params: SimParams, index: int = 0) -> TrajectoryRecord:
    """Seed-deterministic single trajectory (stream ``index`` of ``params.seed``)."""
    batch = simulate_batch(params, [index], keep_snapshots=True)
    rec = record_from_batch(batch, 0)
    if not rec.valid:
        log.warning("trajectory %d invalid: %s at t=%.4g", index, rec.reason, rec.times[-1])
    return rec
