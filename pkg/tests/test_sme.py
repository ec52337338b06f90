import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_feedback import fock, qfunc, sme
from photon_feedback.fock import HilbertConfig
from photon_feedback.sme import InitialState, SimParams


def moments(rho):
    cfg = HilbertConfig(rho.shape[0] - 1)
    a = fock.annihilation(cfg)
    x = fock.expectation((a + a.conj().T) / 2, rho).real
    p = fock.expectation((a - a.conj().T) / 2j, rho).real
    n = fock.expectation(fock.number_op(cfg), rho).real
    return x, p, n


# -- scalar building blocks --------------------------------------------------------

def test_error_signal_examples():
    cfg = HilbertConfig(20)
    assert sme.error_signal(2, fock.number_state(2, cfg)) == 0
    assert sme.error_signal(2, fock.number_state(0, cfg)) == 2
    assert sme.error_signal(0, fock.coherent_state(1.0, cfg)) == pytest.approx(-1.0, abs=1e-8)


def test_feedback_hamiltonian_examples():
    cfg = HilbertConfig(6)
    assert np.max(np.abs(sme.feedback_hamiltonian(20.0, 0.0, cfg))) == 0
    assert sme.feedback_hamiltonian(20.0, 1.0, cfg)[0, 1] == pytest.approx(10.0, abs=1e-14)


@given(e=st.floats(-50, 50, allow_nan=False))
def test_feedback_hamiltonian_hermitian(e):
    H = sme.feedback_hamiltonian(20.0, e, HilbertConfig(8))
    assert np.max(np.abs(H - H.conj().T)) == 0


# -- single steps -------------------------------------------------------------------

@pytest.mark.parametrize("m", [0, 1, 3])
@pytest.mark.parametrize("M", [1.0, 4.0])
def test_number_states_are_fixed_points(m, M):
    params = SimParams(M=M, feedback_enabled=False, n_max=8, dt=1e-3, t_final=1.0)
    rho = fock.number_state(m, params.cfg)
    dW = 0.037
    res = sme.step(rho, params, dW)
    np.testing.assert_allclose(res.rho_next, rho, atol=1e-12)
    assert res.dy == pytest.approx(2 * math.sqrt(M) * m * params.dt + dW, abs=1e-15)


def test_target_state_is_fixed_under_feedback():
    params = SimParams(n_star=2, n_max=10)
    rho = fock.number_state(2, params.cfg)
    rng = np.random.default_rng(1)
    for dW in rng.standard_normal(200) * math.sqrt(params.dt):
        res = sme.step(rho, params, dW)
        assert abs(res.e) < 1e-12
        rho = res.rho_next
    assert qfunc.number_fidelity(rho, 2) == pytest.approx(1.0, abs=1e-12)


def test_free_decay_by_repeated_steps():
    params = SimParams(M=0.0, kappa=0.5, G=0.0, feedback_enabled=False, n_star=0, n_max=8,
                       initial_state=InitialState.number(3), dt=1e-3, t_final=2.0)
    rho = params.initial_state.density_matrix(params.cfg)
    for _ in range(params.n_steps):
        rho = sme.step(rho, params, 0.0).rho_next
    expected = 3 * math.exp(-1.0)
    assert moments(rho)[2] == pytest.approx(expected, rel=1e-2)
    # the loss channel is exact, so the agreement is far tighter than 1%
    assert moments(rho)[2] == pytest.approx(expected, rel=1e-10)


def _first_order_feedback(rho, G, e, cfg, dt):
    """Oracle: rho - i [G e X, rho] dt from the operator module."""
    H = G * e * fock.quadrature_x(cfg)
    return rho - 1j * (H @ rho - rho @ H) * dt


def test_feedback_step_matches_first_order_oracle():
    params = SimParams(n_star=2, G=20.0, dt=1e-3)
    cfg = params.cfg
    rho0 = fock.number_state(0, cfg)
    res = sme.step(rho0, params, 0.0)
    oracle = _first_order_feedback(rho0, params.G, res.e, cfg, params.dt)
    x0, p0, n0 = moments(rho0)
    x1, p1, n1 = moments(res.rho_next)
    xo, po, no = moments(oracle)
    assert res.e == 2.0
    # the drive displaces along P: d<P>/dt = -G e / 2, <X> stays put
    assert po - p0 == pytest.approx(-params.G * res.e * params.dt / 2, rel=1e-12)
    assert p1 - p0 == pytest.approx(po - p0, rel=1e-2)
    assert abs(x1 - x0) < 1e-12 and abs(xo - x0) < 1e-12
    assert n1 > n0


def test_feedback_step_raises_amplitude_quadrature():
    # Stated sign check: <X> should increase after one driven step from vacuum.
    # A drive proportional to X commutes with X, so <X> cannot move; the
    # displacement is along P (see the first-order oracle test above).
    params = SimParams(n_star=2, G=20.0, dt=1e-3)
    rho0 = fock.number_state(0, params.cfg)
    res = sme.step(rho0, params, 0.0)
    assert moments(res.rho_next)[0] > moments(rho0)[0]


def test_step_rejects_wrong_shape():
    with pytest.raises(ValueError):
        sme.step(np.eye(3) / 3, SimParams(n_max=6), 0.0)


def test_step_diagnostics_along_a_trajectory():
    params = SimParams(eta=0.8, kappa=0.05, t_final=2.0)
    rho = params.initial_state.density_matrix(params.cfg)
    noise = sme.trajectory_noise(5, 0, params.n_steps, params.dt)
    worst = {"trace": 0.0, "herm": 0.0, "eig": 0.0, "purity": 0.0}
    for dW in noise:
        res = sme.step(rho, params, dW)
        rho = res.rho_next
        worst["trace"] = max(worst["trace"], abs(np.trace(rho).real - 1))
        worst["herm"] = max(worst["herm"], res.diagnostics["hermiticity_drift"])
        worst["eig"] = min(worst["eig"], res.diagnostics["min_eig_estimate"])
        worst["purity"] = max(worst["purity"], np.trace(rho @ rho).real)
    assert worst["trace"] < 1e-12
    assert worst["herm"] < 1e-6
    assert worst["eig"] > -1e-12
    assert worst["purity"] <= 1 + 1e-9


def test_pure_state_stays_pure_with_perfect_detection():
    params = SimParams(t_final=1.0)
    rec = sme.simulate_trajectory(params.replace(seed=9))
    rho = rec.final_state
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-9)


# -- integrator comparison -----------------------------------------------------------

def test_euler_step_breaches_positivity():
    params = SimParams(scheme="euler", feedback_enabled=False, initial_state=InitialState.coherent(math.sqrt(2)))
    rho = params.initial_state.density_matrix(params.cfg)
    dW = 3 * math.sqrt(params.dt)
    euler = sme.step(rho, params, dW)
    kraus = sme.step(rho, params.replace(scheme="kraus"), dW)
    assert euler.diagnostics["min_eig_estimate"] < -1e-6
    assert kraus.diagnostics["min_eig_estimate"] > -1e-12


def test_euler_trajectory_is_invalidated():
    params = SimParams(scheme="euler", t_final=1.0)
    rec = sme.simulate_trajectory(params)
    assert not rec.valid
    assert rec.reason == "positivity breach"


def test_schemes_agree_to_first_order():
    base = SimParams(eta=0.7, kappa=0.3, initial_state=InitialState.coherent(1.1 + 0.4j))
    rho = base.initial_state.density_matrix(base.cfg)
    diffs = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        p = base.replace(dt=dt, t_final=1.0)
        dW = 0.8 * math.sqrt(dt)
        a = sme.step(rho, p, dW).rho_next
        b = sme.step(rho, p.replace(scheme="euler"), dW).rho_next
        diffs.append(np.abs(a - b).max())
    ratios = np.array(diffs[1:]) / np.array(diffs[:-1])
    np.testing.assert_allclose(ratios, 0.5, atol=0.1)


def test_dt_halving_with_shared_brownian_path():
    fine = SimParams(dt=5e-4)
    coarse = fine.replace(dt=1e-3)
    for seed in range(4):
        dW = sme.trajectory_noise(seed, 0, fine.n_steps, fine.dt)
        bf = sme.integrate_batch(fine, dW[None])
        bc = sme.integrate_batch(coarse, dW.reshape(-1, 2).sum(axis=1)[None])
        assert bf.valid[0] and bc.valid[0]
        ff = qfunc.number_fidelity(bf.final_states[0], 2)
        fc = qfunc.number_fidelity(bc.final_states[0], 2)
        assert abs(ff - fc) < 1e-2


# -- trajectories -------------------------------------------------------------------

def test_seed_determinism_and_sensitivity():
    p = SimParams(t_final=1.0)
    a = sme.simulate_trajectory(p)
    b = sme.simulate_trajectory(p)
    c = sme.simulate_trajectory(p.replace(seed=1))
    np.testing.assert_array_equal(a.dy, b.dy)
    np.testing.assert_array_equal(a.final_state, b.final_state)
    assert not np.array_equal(a.dy, c.dy)


def test_noise_streams_are_counter_based():
    s3 = sme.trajectory_noise(42, 3, 50, 1e-3)
    s5 = sme.trajectory_noise(42, 5, 50, 1e-3)
    assert np.array_equal(sme.trajectory_noise(42, 3, 50, 1e-3), s3)
    assert not np.array_equal(s3, s5)
    # a longer draw extends the same stream
    np.testing.assert_array_equal(sme.trajectory_noise(42, 3, 80, 1e-3)[:50], s3)


def test_batch_matches_single_trajectories():
    p = SimParams(t_final=1.0)
    batch = sme.simulate_batch(p, [0, 1, 2])
    for b, idx in enumerate(batch.indices):
        single = sme.simulate_trajectory(p, index=idx)
        rec = sme.record_from_batch(batch, b)
        np.testing.assert_allclose(rec.n_est, single.n_est, atol=1e-10)
        np.testing.assert_allclose(rec.dy, single.dy, atol=1e-12)


def test_record_layout():
    p = SimParams(t_final=1.0, record_stride=10, snapshot_times=(0.0, 0.5, 1.0))
    rec = sme.simulate_trajectory(p)
    dense = sme.simulate_trajectory(p.replace(record_stride=1, snapshot_times=()))
    assert len(rec.times) == p.n_steps // 10 + 1
    assert rec.times[0] == 0 and rec.dy[0] == 0
    np.testing.assert_allclose(rec.times[-1], 1.0)
    np.testing.assert_array_equal(rec.n_est, dense.n_est[::10])
    assert rec.dy.sum() == pytest.approx(dense.dy.sum(), abs=1e-12)
    np.testing.assert_allclose(rec.drive, p.G * (p.n_star - rec.n_est), atol=1e-12)
    assert [t for t, _ in rec.snapshot_states] == [0.0, 0.5, 1.0]
    np.testing.assert_array_equal(rec.snapshot_states[0][1], fock.number_state(0, p.cfg))
    np.testing.assert_array_equal(rec.snapshot_states[-1][1], rec.final_state)


def test_feedback_off_records_zero_drive():
    rec = sme.simulate_trajectory(SimParams(t_final=0.5, feedback_enabled=False))
    assert np.all(rec.drive == 0) and not np.signbit(rec.drive).any()


def test_truncation_overflow_cuts_record():
    p = SimParams(n_max=6, initial_state=InitialState.coherent(2.0), t_final=1.0)
    with pytest.warns(RuntimeWarning):
        rec = sme.simulate_trajectory(p)
    assert not rec.valid
    assert rec.reason == "truncation overflow"
    assert len(rec.times) == 1


def test_open_loop_collapse_within_longer_horizon():
    # Mt = 10 leaves a few percent of trajectories unresolved between
    # neighbouring levels (likelihood ratio ~ exp(-(2 Mt) +/- 2 sqrt(2 Mt))); by
    # Mt = 20 that tail is gone.
    p = SimParams(G=0.0, feedback_enabled=False, initial_state=InitialState.coherent(math.sqrt(2)),
                  t_final=20.0, record_stride=100, seed=17)
    batch = sme.simulate_batch(p, range(100))
    assert batch.valid.all()
    assert batch.n_var[:, -1].max() < 1e-3
    assert np.mean(batch.n_var[:, 100] < 1e-3) >= 0.9


def test_closed_loop_single_trajectory_reaches_target():
    rec = sme.simulate_trajectory(SimParams(seed=2))
    assert rec.valid
    assert rec.n_var[-1] < 0.01
    assert abs(rec.n_est[-1] - 2) < 0.05
    assert rec.distance[-1] < 1e-3


# -- parameter handling ---------------------------------------------------------------

@pytest.mark.parametrize(
    "changes",
    [
        dict(dt=0.02),
        dict(eta=0.0),
        dict(eta=1.2),
        dict(M=-1.0),
        dict(n_star=12, n_max=13),
        dict(scheme="milstein"),
        dict(record_stride=7),
        dict(t_final=1.0005),
        dict(snapshot_times=(11.0,)),
    ],
)
def test_invalid_params_rejected(changes):
    with pytest.raises(ValueError):
        SimParams(**changes)


def test_default_truncation_from_initial_state():
    assert SimParams().cfg.n_max == 13
    assert SimParams(initial_state=InitialState.coherent(3.0)).cfg.n_max > 13


@given(m=st.integers(0, 50))
def test_initial_state_text_round_trip_number(m):
    s = InitialState.number(m)
    assert InitialState.parse(str(s)) == s


@given(re=st.floats(-5, 5), im=st.floats(-5, 5))
def test_initial_state_text_round_trip_coherent(re, im):
    s = InitialState.coherent(complex(re, im))
    assert InitialState.parse(str(s)) == s


@pytest.mark.parametrize("text", ["", "number", "coherent:", "squeezed:1", "vacuum:2"])
def test_initial_state_parse_errors(text):
    with pytest.raises(ValueError):
        InitialState.parse(text)
