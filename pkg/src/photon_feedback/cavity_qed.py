"""Measurement strength and feasibility figures for a cavity-QED implementation.

The dispersive probe measures photon number at the rate

    M = (P_b / (hbar omega_b)) * [3 N Gamma lambda_b^2 / (4 pi^2 r^2 Delta_b)
                                  * g0^2 / (g0^2 + Omega^2)]^2,
    Omega = Gamma sqrt(I / (2 I_sat)).

All rates are held as angular rates (s^-1).  Which convention a quoted
"2 GHz" or "12 kHz" means is declared per input (see :mod:`.units`), and
:func:`feasibility_both` re-reads the ambiguous inputs under each convention.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from . import units
from .sme import InitialState, SimParams

HBAR = 1.054571817e-34
C_LIGHT = 299792458.0

# rates whose quoted numbers are re-read under both conventions by feasibility_both
AMBIGUOUS_RATES = ("Delta_b", "kappa")


@dataclass(frozen=True)
class AtomicLine:
    name: str
    Gamma: float  # spontaneous emission rate, s^-1
    wavelength: float  # m


CESIUM_D2 = AtomicLine("cesium_d2", Gamma=units.TWO_PI * 5.22e6, wavelength=852.35e-9)
ATOMS = {CESIUM_D2.name: CESIUM_D2}


@dataclass(frozen=True)
class QEDParams:
    """Physical parameters; rates in s^-1 (angular), lengths in m, power in W."""

    P_b: float
    lambda_b: float
    Delta_b: float
    Gamma: float
    r: float
    g0: float
    I_over_Isat: float
    N: float
    kappa: float
    eta: float = 1.0
    L: float | None = None
    finesse: float | None = None
    # declared frequency convention of each rate input, for re-reading
    conventions: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        for name in ("P_b", "lambda_b", "Gamma", "r", "g0", "N"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.I_over_Isat < 0 or self.kappa < 0:
            raise ValueError("drive intensity and kappa must be non-negative")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must satisfy 0 < eta <= 1, got {self.eta}")
        if self.Delta_b == 0:
            raise ValueError("zero probe detuning makes the measurement strength singular")

    @classmethod
    def from_quantities(cls, atom: AtomicLine = CESIUM_D2, **fields) -> "QEDParams":
        """Build from unit-suffixed strings, e.g. ``Delta_b="2 GHz"``."""
        kinds = {
            "P_b": "power", "lambda_b": "length", "Delta_b": "rate", "Gamma": "rate",
            "r": "length", "g0": "rate", "kappa": "rate", "L": "length",
            "I_over_Isat": "intensity_ratio", "eta": "fraction",
        }
        values, conventions = {}, {}
        for name, raw in fields.items():
            if name in ("N", "finesse"):
                values[name] = float(raw)
                continue
            if name == "eta" and isinstance(raw, (int, float)):
                values[name] = float(raw)
                continue
            if name not in kinds:
                raise ValueError(f"unknown QED parameter {name!r}")
            q = units.parse_quantity(raw, kinds[name])
            values[name] = q.si
            if q.kind == "rate":
                conventions[name] = q
        values.setdefault("Gamma", atom.Gamma)
        values.setdefault("lambda_b", atom.wavelength)
        return cls(**values, conventions=conventions)

    def reread(self, convention: str, names=AMBIGUOUS_RATES) -> "QEDParams":
        """Copy with the quoted numbers of ``names`` read under ``convention``."""
        changes = {
            name: units.reinterpret_rate(self.conventions[name], convention)
            for name in names
            if name in self.conventions
        }
        return replace(self, **changes)


@dataclass(frozen=True)
class FeasibilityReport:
    M: float
    M_over_kappa: float
    strong_coupling: float
    omega_b: float
    Omega: float
    kappa: float

    def as_dict(self) -> dict:
        return asdict(self)


def rabi_frequency(Gamma: float, I_over_Isat: float) -> float:
    return Gamma * math.sqrt(I_over_Isat / 2.0)


def probe_angular_frequency(lambda_b: float) -> float:
    return units.TWO_PI * C_LIGHT / lambda_b


def measurement_strength(p: QEDParams) -> float:
    """Photon-number measurement rate ``M`` in s^-1."""
    if p.Delta_b == 0:
        raise ValueError("zero probe detuning")
    omega_b = probe_angular_frequency(p.lambda_b)
    flux = p.P_b / (HBAR * omega_b)
    Omega = rabi_frequency(p.Gamma, p.I_over_Isat)
    dispersive = 3.0 * p.N * p.Gamma * p.lambda_b**2 / (4.0 * math.pi**2 * p.r**2 * p.Delta_b)
    dark_state = p.g0**2 / (p.g0**2 + Omega**2)
    return flux * (dispersive * dark_state) ** 2


def strong_coupling_parameter(p: QEDParams) -> float:
    """``sqrt(N) g0^2 / (Gamma kappa)``; infinite for a lossless cavity."""
    if p.kappa == 0:
        return math.inf
    return math.sqrt(p.N) * p.g0**2 / (p.Gamma * p.kappa)


def feasibility(p: QEDParams) -> FeasibilityReport:
    M = measurement_strength(p)
    return FeasibilityReport(
        M=M,
        M_over_kappa=M / p.kappa if p.kappa > 0 else math.inf,
        strong_coupling=strong_coupling_parameter(p),
        omega_b=probe_angular_frequency(p.lambda_b),
        Omega=rabi_frequency(p.Gamma, p.I_over_Isat),
        kappa=p.kappa,
    )


def feasibility_both(p: QEDParams) -> dict:
    """Reports for the declared inputs and for both global readings of the ambiguous rates."""
    return {
        "declared": feasibility(p),
        "angular": feasibility(p.reread("angular")),
        "ordinary": feasibility(p.reread("ordinary")),
    }


def cavity_linewidth(L: float, finesse: float) -> float:
    """Full linewidth ``c / (2 L F)`` of a Fabry-Perot cavity as an ordinary frequency (Hz)."""
    return C_LIGHT / (2.0 * L * finesse)


@dataclass(frozen=True)
class Numerics:
    """Simulator settings in units of ``1/M``."""

    G: float = 20.0
    dt: float = 1e-3
    t_final: float = 10.0
    n_max: int | None = None
    seed: int = 0
    initial_state: InitialState = InitialState()
    record_stride: int = 1
    snapshot_times: tuple = ()


def to_sim_params(p: QEDParams, n_star: int, numerics: Numerics | None = None) -> SimParams:
    """Rescale physical rates by ``1/M`` so that the simulation clock is ``M t``."""
    numerics = numerics or Numerics()
    M = measurement_strength(p)
    return SimParams(
        M=1.0,
        kappa=p.kappa / M,
        eta=p.eta,
        G=numerics.G,
        n_star=n_star,
        dt=numerics.dt,
        t_final=numerics.t_final,
        n_max=numerics.n_max,
        seed=numerics.seed,
        initial_state=numerics.initial_state,
        record_stride=numerics.record_stride,
        snapshot_times=tuple(numerics.snapshot_times),
    )


def to_physical_rate(sim_rate: float, M: float) -> float:
    return sim_rate * M
