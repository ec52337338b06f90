"""Operator algebra on the truncated single-mode Fock space.

Operators and density matrices are plain dense ``numpy`` arrays in the basis
``|0>, |1>, ..., |n_max>``.  The truncated spaces used here are small (tens of
levels), so dense linear algebra is both simpler and faster than sparse
storage.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8


@dataclass(frozen=True)
class HilbertConfig:
    """Truncation of the cavity mode to occupations ``0..n_max``."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @classmethod
    def for_target(cls, n_star: int, n_initial: float = 0.0) -> "HilbertConfig":
        """Default truncation leaving headroom above the target photon number.

        Feedback transiently overshoots the target, so the cutoff sits
        ``max(10, ceil(6 sqrt(n_ref + 1)))`` levels above
        ``n_ref = max(n_star, n_initial)``.
        """
        n_ref = max(int(n_star), int(math.ceil(n_initial)))
        return cls(n_ref + max(10, math.ceil(6.0 * math.sqrt(n_ref + 1))))


@dataclass(frozen=True)
class FockOperators:
    """Precomputed operators for one truncation; shared read-only."""

    cfg: HilbertConfig
    a: np.ndarray
    n: np.ndarray
    x: np.ndarray
    n_diag: np.ndarray
    x_eigvals: np.ndarray
    x_eigvecs: np.ndarray


def _check_cfg(cfg: HilbertConfig) -> HilbertConfig:
    if not isinstance(cfg, HilbertConfig):
        raise TypeError(f"expected HilbertConfig, got {type(cfg).__name__}")
    return cfg


def annihilation(cfg: HilbertConfig) -> np.ndarray:
    """Annihilation operator with ``<m|a|m+1> = sqrt(m+1)``."""
    dim = _check_cfg(cfg).dim
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number_op(cfg: HilbertConfig) -> np.ndarray:
    return np.diag(np.arange(_check_cfg(cfg).dim, dtype=float)).astype(complex)


def quadrature_x(cfg: HilbertConfig) -> np.ndarray:
    """Amplitude quadrature ``X = (a + a^dagger) / 2``."""
    a = annihilation(cfg)
    return 0.5 * (a + a.conj().T)


@lru_cache(maxsize=32)
def operators(cfg: HilbertConfig) -> FockOperators:
    x = quadrature_x(cfg)
    # X is real symmetric; a real eigenbasis keeps the feedback propagator cheap
    x_eigvals, x_eigvecs = np.linalg.eigh(x.real)
    ops = FockOperators(
        cfg=cfg,
        a=annihilation(cfg),
        n=number_op(cfg),
        x=x,
        n_diag=np.arange(cfg.dim, dtype=float),
        x_eigvals=x_eigvals,
        x_eigvecs=x_eigvecs,
    )
    for arr in (ops.a, ops.n, ops.x, ops.n_diag, ops.x_eigvals, ops.x_eigvecs):
        arr.setflags(write=False)
    return ops


def _check_pair(op: np.ndarray, rho: np.ndarray) -> None:
    op = np.asarray(op)
    rho = np.asarray(rho)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    if rho.shape != op.shape:
        raise ValueError(f"dimension mismatch: operator {op.shape} vs state {rho.shape}")


def lindblad_D(r: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Dissipator ``r rho r^+ - (r^+ r rho + rho r^+ r) / 2``."""
    _check_pair(r, rho)
    rd = r.conj().T
    rdr = rd @ r
    return r @ rho @ rd - 0.5 * (rdr @ rho + rho @ rdr)


def measurement_H(r: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Measurement superoperator ``r rho + rho r^+ - tr[(r + r^+) rho] rho``."""
    _check_pair(r, rho)
    rd = r.conj().T
    return r @ rho + rho @ rd - np.trace((r + rd) @ rho) * rho


def coherent_amplitudes(amp: complex, dim: int) -> np.ndarray:
    """Untruncated Fock amplitudes ``exp(-|amp|^2/2) amp^n / sqrt(n!)``, n < dim."""
    k = np.arange(dim)
    log_mag = -0.5 * abs(amp) ** 2 - 0.5 * np.array([math.lgamma(j + 1) for j in k])
    if amp == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = log_mag + k * math.log(abs(amp))
    return np.exp(log_mag) * np.exp(1j * k * np.angle(amp))


def coherent_state(amp: complex, cfg: HilbertConfig) -> np.ndarray:
    """Pure coherent state, renormalized after truncation.

    Warns when the truncated norm deficit exceeds 1e-6.
    """
    c = coherent_amplitudes(complex(amp), _check_cfg(cfg).dim)
    norm2 = float(np.vdot(c, c).real)
    if 1.0 - norm2 > 1e-6:
        warnings.warn(
            f"coherent state |amp|^2={abs(amp) ** 2:.3g} loses {1 - norm2:.2e} "
            f"of its norm at n_max={cfg.n_max}",
            RuntimeWarning,
            stacklevel=2,
        )
    c = c / math.sqrt(norm2)
    return np.outer(c, c.conj())


def number_state(m: int, cfg: HilbertConfig) -> np.ndarray:
    cfg = _check_cfg(cfg)
    if int(m) != m or not 0 <= m <= cfg.n_max:
        raise ValueError(f"number state |{m}> outside truncation n_max={cfg.n_max}")
    rho = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    rho[m, m] = 1.0
    return rho


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    _check_pair(op, rho)
    # tr[op rho] without forming the product
    return complex(np.sum(op * rho.T))


def variance(op: np.ndarray, rho: np.ndarray) -> float:
    """``<op^2> - <op>^2`` for a Hermitian operator."""
    mean = expectation(op, rho)
    second = expectation(op @ op, rho)
    var = second - mean**2
    if abs(var.imag) > 1e-10:
        raise ValueError(f"variance has imaginary part {var.imag:.3e}; is op Hermitian?")
    return float(var.real)


def state_diagnostics(rho: np.ndarray) -> dict:
    """Hermiticity error, trace error and minimum eigenvalue of ``rho``."""
    rho = np.asarray(rho)
    return {
        "hermiticity": float(np.max(np.abs(rho - rho.conj().T))),
        "trace_error": float(abs(np.trace(rho) - 1.0)),
        "min_eig": float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]),
    }


def is_density_matrix(rho: np.ndarray) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    diag = state_diagnostics(rho)
    return (
        diag["hermiticity"] <= HERMITIAN_TOL
        and diag["trace_error"] <= TRACE_TOL
        and diag["min_eig"] >= -POSITIVITY_TOL
    )
