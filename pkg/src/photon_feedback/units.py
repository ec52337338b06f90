"""Unit-suffixed scalars for scenario files.

Every physical quantity is written as ``"<number> <unit>"``.  Rates may be
given as ordinary frequencies (``Hz`` family, cycles per second) or angular
frequencies (``rad/s`` family, also ``1/s``); both are converted to an angular
rate in s^-1, and the declared convention travels with the value.  The
simulator's own time base uses ``tau`` (time) and ``/tau`` (rate).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# unit -> (kind, factor to SI, frequency convention or None)
UNITS = {
    "W": ("power", 1.0, None),
    "mW": ("power", 1e-3, None),
    "uW": ("power", 1e-6, None),
    "µW": ("power", 1e-6, None),
    "nW": ("power", 1e-9, None),
    "m": ("length", 1.0, None),
    "cm": ("length", 1e-2, None),
    "mm": ("length", 1e-3, None),
    "um": ("length", 1e-6, None),
    "µm": ("length", 1e-6, None),
    "nm": ("length", 1e-9, None),
    "s": ("time", 1.0, None),
    "ms": ("time", 1e-3, None),
    "us": ("time", 1e-6, None),
    "Hz": ("rate", TWO_PI, "ordinary"),
    "kHz": ("rate", TWO_PI * 1e3, "ordinary"),
    "MHz": ("rate", TWO_PI * 1e6, "ordinary"),
    "GHz": ("rate", TWO_PI * 1e9, "ordinary"),
    "rad/s": ("rate", 1.0, "angular"),
    "krad/s": ("rate", 1e3, "angular"),
    "Mrad/s": ("rate", 1e6, "angular"),
    "Grad/s": ("rate", 1e9, "angular"),
    "1/s": ("rate", 1.0, "angular"),
    "/s": ("rate", 1.0, "angular"),
    "tau": ("sim_time", 1.0, None),
    "/tau": ("sim_rate", 1.0, None),
    "1/tau": ("sim_rate", 1.0, None),
    "Isat": ("intensity_ratio", 1.0, None),
    "%": ("fraction", 1e-2, None),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?:\s*/\s*\d+)?)\s*(\S+)\s*$")


class UnitError(ValueError):
    pass


@dataclass(frozen=True)
class Quantity:
    """A parsed scalar: ``si`` is in SI (rates as angular s^-1)."""

    si: float
    kind: str
    unit: str
    convention: str | None = None

    @property
    def quoted(self) -> float:
        """The number as written, before unit scaling."""
        return self.si / UNITS[self.unit][1]


def _number(text: str) -> float:
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def parse_quantity(text, kind: str | None = None) -> Quantity:
    """Parse ``"<number> <unit>"``; a bare number is rejected.

    ``"1/4 Isat"`` style fractions are accepted.
    """
    if not isinstance(text, str):
        raise UnitError(f"{text!r} has no unit; write it as '<number> <unit>'")
    if text.strip().endswith("dB"):
        raise UnitError(f"{text!r}: gains in dB have no stated reference; give a rate in /tau")
    m = _QUANTITY.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}; expected '<number> <unit>'")
    value, unit = _number(m.group(1)), m.group(2)
    if unit not in UNITS:
        raise UnitError(f"unknown unit {unit!r} in {text!r}")
    unit_kind, factor, convention = UNITS[unit]
    if kind is not None and unit_kind != kind:
        raise UnitError(f"{text!r} is a {unit_kind}, expected a {kind}")
    return Quantity(si=value * factor, kind=unit_kind, unit=unit, convention=convention)


def reinterpret_rate(q: Quantity, convention: str) -> float:
    """Angular rate obtained by reading the quoted number under ``convention``."""
    if q.kind != "rate":
        raise UnitError(f"{q} is not a rate")
    if convention == q.convention:
        return q.si
    if convention == "ordinary":
        return q.si * TWO_PI
    if convention == "angular":
        return q.si / TWO_PI
    raise UnitError(f"unknown frequency convention {convention!r}")


def format_quantity(si: float, unit: str) -> str:
    return f"{si / UNITS[unit][1]:.17g} {unit}"
