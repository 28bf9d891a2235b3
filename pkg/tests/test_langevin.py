import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opencavity.errors import GrowthWarning, NoSteadyState, StepSizeError
from opencavity.langevin import (mean_evolution, moment_evolution, noise_source,
                                 simulate_trajectories, steady_state_covariance)
from opencavity.resonances import find_poles
from opencavity.spectrum import CavityModel, CouplingModel, ModeSpectrum, make_model

from conftest import model_params, random_model


def test_zero_coupling_unit_modulus():
    m = make_model([1.0, 2.0], np.zeros((2, 1)))
    a = mean_evolution(m, [1, 0], np.linspace(0, 50, 11))
    assert np.allclose(np.abs(a[:, 0]), 1.0, atol=1e-13)


def test_scalar_mean():
    w = 0.1
    m = make_model([1.0], [[w]])
    t = np.linspace(0, 30, 7)
    a = mean_evolution(m, [0.5 + 0.5j], t)[:, 0]
    assert np.allclose(a, np.exp(-1j * t - np.pi * w * w * t) * (0.5 + 0.5j), atol=1e-13, rtol=0)


def test_superradiant_intensity_decay():
    w = 0.1
    m = CavityModel(ModeSpectrum([1.0, 1.0]), CouplingModel("constant", np.array([[w], [w]])))
    t = np.array([0.0, 3.0])
    a = mean_evolution(m, np.array([1, 1]) / np.sqrt(2), t)
    intensity = np.sum(np.abs(a) ** 2, axis=1)
    assert abs(intensity[1] - np.exp(-2 * np.pi * w * w * 2 * t[1])) < 1e-12


@given(model_params(max_n=6, max_m=3))
def test_expm_and_eig_agree(params):
    n, m, seed, scale = params
    rng = np.random.default_rng(seed)
    model = random_model(rng, n, m, scale)
    a0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    t = np.linspace(0, 20, 5)
    assert np.max(np.abs(mean_evolution(model, a0, t) - mean_evolution(model, a0, t, method="eig"))) < 1e-10


def test_mean_pole_consistency():
    model = random_model(np.random.default_rng(2), 3, 2, scale=0.1)
    poles = find_poles(model)
    a0 = np.array([1.0, 0.5, -0.3], complex)
    t = np.linspace(0, 20, 21)
    a = mean_evolution(model, a0, t)
    for p in poles:
        c = np.abs(a @ p.left.conj())
        rate = -np.polyfit(t, np.log(c), 1)[0]
        assert abs(rate - p.width / 2) < 1e-8 * p.width / 2


def test_growth_warning():
    m = make_model([1.0], [[0.05]], gamma=[[0.1]])
    with pytest.warns(GrowthWarning):
        mean_evolution(m, [1.0], [0.0, 1.0])


def test_times_validation():
    with pytest.raises(ValueError):
        mean_evolution(make_model([1.0], [[0.1]]), [1.0], [1.0, 0.5])


def test_vacuum_steady_state_zero():
    m = random_model(np.random.default_rng(3), 4, 2)
    assert np.array_equal(steady_state_covariance(m, 0.0), np.zeros((4, 4)))


@pytest.mark.parametrize("nbar", [0.0, 0.3, 2.0])
def test_single_mode_thermal(nbar):
    m = make_model([1.0], [[0.1]])
    assert abs(steady_state_covariance(m, nbar)[0, 0] - nbar) < 1e-10


def test_media_source_detailed_balance():
    # one absorbing bath at n_abs and vacuum escape: occupation = n_abs k^2 / (w^2 + k^2)
    m = make_model([1.0], [[0.1]], kappa=[[0.05]], n_abs=1.5)
    c = steady_state_covariance(m, 0.0)[0, 0]
    assert abs(c - 1.5 * 0.0025 / (0.01 + 0.0025)) < 1e-12


def test_lyapunov_matches_moment_ode():
    m = make_model([1.0, 1.2], [[0.12], [0.1]])
    t = np.array([0.0, 400.0])
    ode = moment_evolution(m, 1.0, t)[-1]
    assert np.max(np.abs(ode - steady_state_covariance(m, 1.0))) < 1e-8


def test_moment_positivity():
    m = random_model(np.random.default_rng(4), 3, 2, scale=0.1)
    for c in moment_evolution(m, [0.5, 2.0], np.linspace(0, 50, 11)):
        assert np.min(np.linalg.eigvalsh(0.5 * (c + c.conj().T))) >= -1e-9


def test_no_steady_state():
    m = make_model([1.0, 2.0], [[0.1], [0.0]])
    with pytest.raises(NoSteadyState):
        steady_state_covariance(m, 1.0)


def test_weak_damping_factorization():
    base = make_model([1.0, 1.1, 1.25], [[0.05, 0.02], [0.04, -0.03], [0.03, 0.05]])

    def ratio(s):
        c = steady_state_covariance(base.scaled(s), [1.0, 0.2])
        off = np.max(np.abs(c - np.diag(np.diag(c))))
        return off / np.max(np.abs(np.diag(c)))

    r1, r2 = ratio(0.2), ratio(0.1)
    assert abs(np.log2(r1 / r2) - 2.0) < 0.1


def test_vacuum_trajectories_empty_out():
    m = make_model([1.0], [[0.2]])
    run = simulate_trajectories(m, 0.0, dt=0.01, t_max=150.0, n_traj=50, seed=1, a0=[1.0])
    assert abs(run.covariance[-1][0, 0]) < 1e-8


def test_single_mode_thermal_trajectories():
    m = make_model([1.0], [[0.15]])
    run = simulate_trajectories(m, 2.0, dt=0.01, t_max=60.0, n_traj=4000, seed=5, n_record=10)
    occ = run.covariance[-1][0, 0].real
    assert abs(occ - 2.0) < 4 * run.covariance_stderr[0, 0].real + 0.01 * 2.0


def test_trajectory_mean_matches_propagator():
    m = make_model([1.0, 1.3], [[0.1], [0.12]])
    a0 = np.array([1.0, 0.5j])
    run = simulate_trajectories(m, 0.5, dt=0.005, t_max=5.0, n_traj=2000, seed=3, a0=a0, n_record=5)
    exact = mean_evolution(m, a0, run.times)[-1]
    assert np.all(np.abs(run.mean[-1] - exact) < 5 * np.abs(run.mean_stderr) + 0.01)


def test_seed_determinism_and_threads():
    m = random_model(np.random.default_rng(6), 2, 1, scale=0.1)
    kw = dict(dt=0.02, t_max=2.0, n_traj=2500, n_record=4)
    a = simulate_trajectories(m, 0.5, seed=9, **kw)
    b = simulate_trajectories(m, 0.5, seed=9, threads=3, **kw)
    c = simulate_trajectories(m, 0.5, seed=10, **kw)
    assert np.array_equal(a.final_states, b.final_states)
    assert np.array_equal(a.covariance, b.covariance)
    assert not np.array_equal(a.final_states, c.final_states)


def test_step_guard():
    m = make_model([1.0, 3.0], [[0.1], [0.1]])
    with pytest.raises(StepSizeError):
        simulate_trajectories(m, 0.0, dt=0.2, t_max=1.0, n_traj=1)
    with pytest.raises(ValueError):
        simulate_trajectories(m, 0.0, dt=0.01, t_max=1.0, n_traj=0)


@given(st.floats(0.0, 3.0), model_params(max_n=5, max_m=3))
def test_noise_source_psd(nbar, params):
    n, m, seed, scale = params
    q = noise_source(random_model(np.random.default_rng(seed), n, m, scale, n_abs=1), nbar)
    assert np.allclose(q, q.conj().T)
    assert np.min(np.linalg.eigvalsh(q)) >= -1e-14
