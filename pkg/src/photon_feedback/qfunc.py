"""Husimi Q-function and the number-state distance functional.

Phase-space coordinates follow a doubled-amplitude convention: the point
``alpha`` corresponds to the standard coherent amplitude ``beta = alpha / 2``,
so the vacuum reads ``Q(alpha) = exp(-|alpha|^2 / 4) / pi`` and every Q-function
integrates to 4 over ``dx dy``.

The distance to the target number state ``n*`` is

    D = 1 - c(n*) * integral |alpha|^(2 n*) exp(-|alpha|^2/4) Q(alpha) dx dy

The angular integral removes off-diagonal elements, leaving a weighted sum of
photon-number populations with closed-form weights (see
:func:`distance_weights`).  ``c(n*)`` is fixed so that ``D`` vanishes on
``|n*>``; the textbook prefactor ``1 / (pi 4^(n*+1) n*!)`` does not do so in
this convention, and :func:`normalization_report` quantifies the mismatch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

CONVENTION_TAG = "paper-quarter-exponent"
# integral of Q over dx dy in the doubled-amplitude convention
Q_NORMALIZATION = 4.0


@dataclass(frozen=True)
class GridSpec:
    """Square grid ``|x|, |y| <= extent`` with ``points`` samples per axis.

    ``extent=None`` picks ``2 (sqrt(n_max) + 3)`` for the state's truncation.
    """

    points: int = 201
    extent: float | None = None

    def axes(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        extent = self.extent if self.extent is not None else 2.0 * (math.sqrt(n_max) + 3.0)
        ax = np.linspace(-extent, extent, self.points)
        return ax, ax.copy()


@dataclass
class QGrid:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray  # values[i, j] = Q(x[j] + 1j * y[i])
    convention_tag: str = CONVENTION_TAG

    def integral(self, weight: np.ndarray | None = None) -> float:
        f = self.values if weight is None else self.values * weight
        return float(np.trapezoid(np.trapezoid(f, self.x, axis=1), self.y))

    def alpha(self) -> np.ndarray:
        return self.x[None, :] + 1j * self.y[:, None]


@dataclass(frozen=True)
class DistanceReport:
    value: float
    method: str
    n_star: int
    normalization_used: float
    details: dict = field(default_factory=dict, compare=False)


def _coherent_rows(beta: np.ndarray, dim: int) -> np.ndarray:
    """Rows of untruncated coherent-state amplitudes for an array of ``beta``."""
    beta = beta.ravel()
    k = np.arange(dim)
    half_log_fact = 0.5 * np.array([math.lgamma(j + 1) for j in k])
    mag = np.abs(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.log(mag)
        logc = -0.5 * mag[:, None] ** 2 + k[None, :] * log_mag[:, None] - half_log_fact[None, :]
    logc[:, 0] = -0.5 * mag**2
    phase = np.exp(1j * k[None, :] * np.angle(beta)[:, None])
    return np.exp(logc) * phase


def q_function(rho: np.ndarray, grid_spec: GridSpec | None = None) -> QGrid:
    """Evaluate ``Q(alpha) = <alpha/2| rho |alpha/2> / pi`` on a grid.

    Raises
    ------
    ValueError
        If the grid misses more than 1e-4 of the normalization.
    """
    rho = np.asarray(rho)
    dim = rho.shape[0]
    grid_spec = grid_spec or GridSpec()
    x, y = grid_spec.axes(dim - 1)
    alpha = x[None, :] + 1j * y[:, None]
    c = _coherent_rows(alpha / 2.0, dim)
    # <beta|rho|beta> = sum_mn conj(c_m) rho_mn c_n
    vals = np.einsum("pm,mn,pn->p", c.conj(), rho, c).real / math.pi
    grid = QGrid(x=x, y=y, values=vals.reshape(alpha.shape))
    deficit = abs(grid.integral() / Q_NORMALIZATION - 1.0)
    if deficit > 1e-4:
        raise ValueError(
            f"Q-function grid too small: normalization deficit {deficit:.2e} > 1e-4"
        )
    return grid


def _log_radial_integrals(n_star: int, n_max: int) -> np.ndarray:
    """log of ``integral |alpha|^(2 n*) exp(-|alpha|^2/4) Q_m dx dy`` for ``|m><m|``.

    With ``u = |alpha|^2`` and ``Q_m = exp(-u/4) (u/4)^m / (pi m!)`` the
    integral is ``(n*+m)! 2^(n*+m+1) / (4^m m!)``.
    """
    m = np.arange(n_max + 1)
    lg = np.vectorize(math.lgamma)
    return lg(n_star + m + 1.0) + (n_star + m + 1) * math.log(2.0) - m * math.log(4.0) - lg(m + 1.0)


@lru_cache(maxsize=64)
def distance_weights(n_star: int, n_max: int) -> np.ndarray:
    """Population weights ``r_m`` with ``D = 1 - sum_m r_m rho_mm`` and ``r_{n*} = 1``."""
    if not 0 <= n_star <= n_max:
        raise ValueError(f"n_star={n_star} outside 0..{n_max}")
    logw = _log_radial_integrals(n_star, n_max)
    r = np.exp(logw - logw[n_star])
    r.setflags(write=False)
    return r


def calibration_constant(n_star: int) -> float:
    """``1 / integral(...)`` evaluated on the target state itself."""
    return 1.0 / math.exp(_log_radial_integrals(n_star, n_star)[n_star])


def literal_prefactor(n_star: int) -> float:
    return 1.0 / (math.pi * 4.0 ** (n_star + 1) * math.factorial(n_star))


def normalization_report(n_star: int) -> dict:
    lit = literal_prefactor(n_star)
    cal = calibration_constant(n_star)
    return {"n_star": n_star, "literal": lit, "calibrated": cal, "literal_over_calibrated": lit / cal}


def photon_distribution(rho: np.ndarray) -> np.ndarray:
    return np.real(np.diagonal(np.asarray(rho))).copy()


def number_fidelity(rho: np.ndarray, m: int) -> float:
    """Population of ``|m>``, i.e. the fidelity with that number state."""
    rho = np.asarray(rho)
    if not 0 <= m < rho.shape[0]:
        raise IndexError(f"number state |{m}> outside 0..{rho.shape[0] - 1}")
    return float(rho[m, m].real)


def distance(
    rho: np.ndarray,
    n_star: int,
    method: str = "fock_diagonal",
    grid_spec: GridSpec | None = None,
) -> DistanceReport:
    rho = np.asarray(rho)
    n_max = rho.shape[0] - 1
    cal = calibration_constant(n_star)
    if method == "fock_diagonal":
        value = 1.0 - float(distance_weights(n_star, n_max) @ photon_distribution(rho))
    elif method == "grid_quadrature":
        grid = q_function(rho, grid_spec)
        u = np.abs(grid.alpha()) ** 2
        kernel = u**n_star * np.exp(-u / 4.0)
        value = 1.0 - cal * grid.integral(kernel)
    else:
        raise ValueError(f"unknown distance method {method!r}")
    norm = normalization_report(n_star)
    log.debug(
        "distance n*=%d: calibrated prefactor %.6e, literal %.6e (ratio %.6f)",
        n_star, norm["calibrated"], norm["literal"], norm["literal_over_calibrated"],
    )
    return DistanceReport(value=value, method=method, n_star=n_star, normalization_used=cal, details=norm)


def write_qgrid(path: str | Path, grid: QGrid) -> None:
    """Write a QGrid as a whitespace-delimited matrix with a one-line header."""
    path = Path(path)
    xs = ",".join(f"{v:.17g}" for v in grid.x)
    ys = ",".join(f"{v:.17g}" for v in grid.y)
    header = f"convention_tag={grid.convention_tag}; x={xs}; y={ys}"
    partial = path.with_name(path.name + ".partial")
    np.savetxt(partial, grid.values, fmt="%.17g", header=header, comments="# ")
    partial.replace(path)


def read_qgrid(path: str | Path) -> QGrid:
    with open(path) as fh:
        header = fh.readline()
    if not header.startswith("# "):
        raise ValueError(f"{path}: missing QGrid header")
    fields = dict(part.strip().split("=", 1) for part in header[2:].strip().split(";"))
    x = np.array([float(v) for v in fields["x"].split(",")])
    y = np.array([float(v) for v in fields["y"].split(",")])
    values = np.loadtxt(path, comments="#", ndmin=2)
    return QGrid(x=x, y=y, values=values, convention_tag=fields["convention_tag"])
