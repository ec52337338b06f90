import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from photon_feedback import cavity_qed, units
from photon_feedback.cavity_qed import CESIUM_D2, QEDParams
from photon_feedback.config import load_scenario


@pytest.fixture(scope="module")
def table1():
    return load_scenario("table1").qed


def base_params(**changes):
    kw = dict(
        P_b=1e-6, lambda_b=852.35e-9, Delta_b=2e9, Gamma=CESIUM_D2.Gamma, r=110e-6,
        g0=2 * math.pi * 200e3, I_over_Isat=0.25, N=1e6, kappa=12e3,
    )
    kw.update(changes)
    return QEDParams(**kw)


def eq_oracle(P_b, lam, Delta, Gamma, r, g0, I, N):
    """Hand-evaluated measurement rate with plain floats."""
    hbar, c = 1.054571817e-34, 299792458.0
    omega = 2 * math.pi * c / lam
    Omega2 = Gamma**2 * I / 2
    bracket = 3 * N * Gamma * lam**2 / (4 * math.pi**2 * r**2 * Delta) * g0**2 / (g0**2 + Omega2)
    return P_b / (hbar * omega) * bracket**2


# -- Rabi frequency -------------------------------------------------------------------

def test_rabi_frequency_examples():
    G = CESIUM_D2.Gamma
    assert cavity_qed.rabi_frequency(G, 2.0) == pytest.approx(G, rel=1e-15)
    assert cavity_qed.rabi_frequency(G, 0.25) == pytest.approx(G / math.sqrt(8), rel=1e-15)
    assert cavity_qed.rabi_frequency(G, 0.0) == 0.0


# -- measurement strength -----------------------------------------------------------

def test_table1_measurement_strength(table1):
    M = cavity_qed.measurement_strength(table1)
    assert 2.5e6 / 2 <= M <= 2.5e6 * 2
    expected = eq_oracle(1e-6, 852.35e-9, 2e9, 2 * math.pi * 5.22e6, 110e-6, 2 * math.pi * 200e3, 0.25, 1e6)
    assert M == pytest.approx(expected, rel=1e-12)


def test_doubling_detuning_quarters_M():
    p = base_params()
    q = base_params(Delta_b=2 * p.Delta_b)
    assert cavity_qed.measurement_strength(q) / cavity_qed.measurement_strength(p) == pytest.approx(0.25, rel=1e-14)


def test_weak_drive_limit_is_maximal():
    weak = cavity_qed.measurement_strength(base_params(I_over_Isat=0.0))
    p = base_params(I_over_Isat=0.0)
    bare = eq_oracle(p.P_b, p.lambda_b, p.Delta_b, p.Gamma, p.r, p.g0, 0.0, p.N)
    assert weak == pytest.approx(bare, rel=1e-14)
    drives = [0.0, 0.01, 0.25, 1.0, 4.0]
    Ms = [cavity_qed.measurement_strength(base_params(I_over_Isat=i)) for i in drives]
    assert all(a > b for a, b in zip(Ms, Ms[1:]))


@given(scale=st.floats(0.1, 10.0))
def test_linear_in_power(scale):
    p = base_params()
    ratio = cavity_qed.measurement_strength(base_params(P_b=scale * p.P_b)) / cavity_qed.measurement_strength(p)
    assert ratio == pytest.approx(scale, rel=1e-12)


@given(scale=st.floats(0.1, 10.0))
def test_quadratic_in_atom_number(scale):
    p = base_params()
    ratio = cavity_qed.measurement_strength(base_params(N=scale * p.N)) / cavity_qed.measurement_strength(p)
    assert ratio == pytest.approx(scale**2, rel=1e-12)


@given(scale=st.floats(1.01, 10.0))
def test_decreasing_in_waist(scale):
    p = base_params()
    assert cavity_qed.measurement_strength(base_params(r=scale * p.r)) < cavity_qed.measurement_strength(p)


def test_zero_detuning_rejected():
    with pytest.raises(ValueError, match="detuning"):
        base_params(Delta_b=0.0)


@pytest.mark.parametrize("field,value", [("P_b", 0.0), ("N", -1.0), ("eta", 0.0), ("kappa", -1.0)])
def test_invalid_physical_parameters(field, value):
    with pytest.raises(ValueError):
        base_params(**{field: value})


# -- feasibility report ---------------------------------------------------------------

def test_table1_feasibility(table1):
    rep = cavity_qed.feasibility(table1)
    assert 100 <= rep.M_over_kappa <= 400
    assert rep.kappa == 12e3
    assert rep.strong_coupling > 1
    assert set(rep.as_dict()) == {"M", "M_over_kappa", "strong_coupling", "omega_b", "Omega", "kappa"}


def test_both_conventions_reported(table1):
    reports = cavity_qed.feasibility_both(table1)
    assert set(reports) == {"declared", "angular", "ordinary"}
    assert reports["declared"] == reports["angular"]
    # reading Delta_b as cycles per second multiplies it by 2 pi; M falls by (2 pi)^2
    ratio = reports["angular"].M / reports["ordinary"].M
    assert ratio == pytest.approx((2 * math.pi) ** 2, rel=1e-12)
    assert reports["ordinary"].kappa == pytest.approx(2 * math.pi * 12e3, rel=1e-15)


def test_geometry_linewidth_consistent_with_quoted_decay(table1):
    width = cavity_qed.cavity_linewidth(table1.L, table1.finesse)
    assert 6e3 <= width <= 24e3


def test_lossless_cavity_report():
    rep = cavity_qed.feasibility(base_params(kappa=0.0))
    assert math.isinf(rep.M_over_kappa) and math.isinf(rep.strong_coupling)


# -- simulator bridge ------------------------------------------------------------------

def test_to_sim_params(table1):
    sim = cavity_qed.to_sim_params(table1, n_star=2)
    assert sim.M == 1.0
    assert 1 / 400 <= sim.kappa <= 1 / 100
    assert sim.eta == pytest.approx(0.8)
    M = cavity_qed.measurement_strength(table1)
    assert cavity_qed.to_physical_rate(sim.kappa, M) == pytest.approx(table1.kappa, rel=1e-12)


def test_to_sim_params_lossless():
    assert cavity_qed.to_sim_params(base_params(kappa=0.0), n_star=2).kappa == 0.0


def test_numerics_pass_through():
    num = cavity_qed.Numerics(G=5.0, dt=5e-4, t_final=2.0, seed=8, record_stride=4)
    sim = cavity_qed.to_sim_params(base_params(), n_star=1, numerics=num)
    assert (sim.G, sim.dt, sim.t_final, sim.seed, sim.record_stride, sim.n_star) == (5.0, 5e-4, 2.0, 8, 4, 1)


# -- units ------------------------------------------------------------------------

@pytest.mark.parametrize(
    "text,si",
    [
        ("1 uW", 1e-6),
        ("852.35 nm", 852.35e-9),
        ("4 cm", 0.04),
        ("2 GHz", 2 * math.pi * 2e9),
        ("2 Grad/s", 2e9),
        ("12 kHz", 2 * math.pi * 12e3),
        ("12 1/s", 12.0),
        ("1/4 Isat", 0.25),
        ("80 %", 0.8),
        ("1e-3 tau", 1e-3),
        ("20 /tau", 20.0),
    ],
)
def test_parse_quantity(text, si):
    assert units.parse_quantity(text).si == pytest.approx(si, rel=1e-15)


@pytest.mark.parametrize("text", [1.0, "12", "12 furlongs", "20 dB", "kHz"])
def test_parse_quantity_rejects(text):
    with pytest.raises(units.UnitError):
        units.parse_quantity(text)


def test_parse_quantity_kind_check():
    with pytest.raises(units.UnitError):
        units.parse_quantity("4 cm", "rate")


@given(value=st.floats(1e-3, 1e12))
def test_rate_convention_round_trip(value):
    q = units.parse_quantity(f"{value!r} kHz")
    as_angular = units.reinterpret_rate(q, "angular")
    back = units.reinterpret_rate(units.Quantity(as_angular, "rate", "rad/s", "angular"), "ordinary")
    assert back == pytest.approx(q.si, rel=1e-15)
    assert units.reinterpret_rate(q, "ordinary") == q.si
    assert q.quoted == pytest.approx(value, rel=1e-15)


def test_format_quantity_round_trip():
    q = units.parse_quantity("12.5 kHz")
    assert units.parse_quantity(units.format_quantity(q.si, "kHz")).si == q.si
