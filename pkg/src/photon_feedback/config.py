"""Scenario files: TOML with a unit on every physical quantity.

Sections
--------
``[simulation]``
    ``M``, ``kappa``, ``G`` (``/tau``); ``dt``, ``t_final`` (``tau``); ``eta``
    (number or ``%``); ``n_star``, ``n_max``, ``seed``, ``record_stride``,
    ``positivity_stride`` (integers); ``initial_state`` (``vacuum``,
    ``number:m``, ``coherent:amp``); ``feedback`` (bool); ``scheme``;
    ``snapshot_times`` (list of ``tau``).
``[qed]``
    Physical parameters, e.g. ``P_b = "1 uW"``, ``Delta_b = "2 GHz"``; ``atom``
    picks bundled constants; ``drive_simulation = true`` replaces the
    simulation's ``M``, ``kappa`` and ``eta`` by the rescaled physical values.
``[ensemble]``
    ``n_traj``, ``master_seed``, ``decimation``, ``kappa_sweep`` (list of ``/tau``).
``[output]``
    ``directory``.

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import cavity_qed, units
from .ensemble import EnsembleSpec
from .sme import InitialState, SimParams

log = logging.getLogger(__name__)

SCHEMA = {
    "simulation": {
        "M", "kappa", "eta", "G", "n_star", "dt", "t_final", "n_max", "seed",
        "initial_state", "feedback", "scheme", "record_stride", "snapshot_times",
        "positivity_stride",
    },
    "qed": {
        "atom", "P_b", "lambda_b", "Delta_b", "Gamma", "r", "g0", "I_over_Isat",
        "N", "kappa", "eta", "L", "finesse", "drive_simulation",
    },
    "ensemble": {"n_traj", "master_seed", "decimation", "kappa_sweep"},
    "output": {"directory"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    sim: SimParams
    qed: cavity_qed.QEDParams | None
    ensemble: EnsembleSpec | None
    output_dir: Path
    raw: dict


def bundled_scenarios() -> list[str]:
    pkg = resources.files("photon_feedback") / "scenarios"
    return sorted(p.name[: -len(".toml")] for p in pkg.iterdir() if p.name.endswith(".toml"))


def _read(source: str | Path) -> tuple[str, dict]:
    path = Path(source)
    if path.is_file():
        text, name = path.read_text(), path.stem
    else:
        name = str(source).removesuffix(".toml").removesuffix(".scenario")
        res = resources.files("photon_feedback") / "scenarios" / f"{name}.toml"
        if not res.is_file():
            raise ConfigError(f"no scenario file or bundled scenario named {source!r}")
        text = res.read_text()
    try:
        return name, tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _validate_keys(raw: dict) -> None:
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(body) - SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")


def _q(value, kind: str, where: str) -> float:
    try:
        return units.parse_quantity(value, kind).si
    except units.UnitError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _fraction(value, where: str) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return _q(value, "fraction", where)


def _sim_params(body: dict) -> SimParams:
    kw = {}
    for key in ("M", "kappa", "G"):
        if key in body:
            kw[key] = _q(body[key], "sim_rate", f"simulation.{key}")
    for key in ("dt", "t_final"):
        if key in body:
            kw[key] = _q(body[key], "sim_time", f"simulation.{key}")
    if "eta" in body:
        kw["eta"] = _fraction(body["eta"], "simulation.eta")
    for key in ("n_star", "n_max", "seed", "record_stride", "positivity_stride"):
        if key in body:
            kw[key] = _int(body[key], f"simulation.{key}")
    if "initial_state" in body:
        try:
            kw["initial_state"] = InitialState.parse(str(body["initial_state"]))
        except ValueError as exc:
            raise ConfigError(f"simulation.initial_state: {exc}") from exc
    if "feedback" in body:
        kw["feedback_enabled"] = bool(body["feedback"])
    if "scheme" in body:
        kw["scheme"] = str(body["scheme"])
    if "snapshot_times" in body:
        kw["snapshot_times"] = tuple(
            _q(t, "sim_time", "simulation.snapshot_times") for t in body["snapshot_times"]
        )
    return SimParams(**kw)


def _qed_params(body: dict) -> cavity_qed.QEDParams:
    body = dict(body)
    body.pop("drive_simulation", None)
    atom_name = body.pop("atom", cavity_qed.CESIUM_D2.name)
    if atom_name not in cavity_qed.ATOMS:
        raise ConfigError(f"qed.atom: unknown atom {atom_name!r}")
    try:
        return cavity_qed.QEDParams.from_quantities(atom=cavity_qed.ATOMS[atom_name], **body)
    except (units.UnitError, TypeError) as exc:
        raise ConfigError(f"[qed]: {exc}") from exc


def apply_override(raw: dict, assignment: str) -> None:
    """Apply ``section.key=value`` with ``value`` parsed as a TOML value."""
    target, sep, value = assignment.partition("=")
    section, dot, key = target.strip().partition(".")
    if not sep or not dot:
        raise ConfigError(f"override {assignment!r} must look like section.key=value")
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    raw.setdefault(section, {})[key] = parsed


def load_scenario(source: str | Path, overrides=(), seed: int | None = None) -> ScenarioConfig:
    name, raw = _read(source)
    raw = copy.deepcopy(raw)
    for assignment in overrides:
        apply_override(raw, assignment)
    if seed is not None:
        raw.setdefault("simulation", {})["seed"] = seed
        if "ensemble" in raw:
            raw["ensemble"]["master_seed"] = seed
    _validate_keys(raw)
    try:
        sim = _sim_params(raw.get("simulation", {}))
        qed = _qed_params(raw["qed"]) if "qed" in raw else None
        if qed is not None and raw["qed"].get("drive_simulation", False):
            M = cavity_qed.measurement_strength(qed)
            sim = sim.replace(M=1.0, kappa=qed.kappa / M, eta=qed.eta)
            log.info("simulation rates taken from [qed]: M=%.6g s^-1, kappa/M=%.6g", M, qed.kappa / M)
        ens = None
        if "ensemble" in raw:
            body = raw["ensemble"]
            ens = EnsembleSpec(
                base=sim,
                n_traj=_int(body.get("n_traj", 1000), "ensemble.n_traj"),
                master_seed=_int(body["master_seed"], "ensemble.master_seed") if "master_seed" in body else None,
                kappa_sweep=tuple(_q(k, "sim_rate", "ensemble.kappa_sweep") for k in body.get("kappa_sweep", ())),
                decimation=_int(body["decimation"], "ensemble.decimation") if "decimation" in body else None,
            )
            ens.params  # validates decimation against the step count
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(raw.get("output", {}).get("directory", f"out/{name}"))
    return ScenarioConfig(name=name, sim=sim, qed=qed, ensemble=ens, output_dir=out, raw=raw)
