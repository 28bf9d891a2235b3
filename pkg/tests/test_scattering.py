import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opencavity.errors import SingularResponse
from opencavity.scattering import io_transform, phase_winding, s_matrix, sweep
from opencavity.spectrum import make_model

from conftest import model_params, random_model


def test_zero_coupling_identity():
    m = make_model([1.0, 2.0], np.zeros((2, 3)))
    assert np.array_equal(s_matrix(m, 1.5), np.eye(3))


def test_breit_wigner_on_resonance():
    w = 0.1
    m = make_model([1.0], [[w]])
    assert abs(s_matrix(m, 1.0)[0, 0] + 1) < 1e-12


def test_breit_wigner_detuned():
    w = 0.1
    m = make_model([1.0], [[w]])
    s = s_matrix(m, 1.0 + np.pi * w * w)[0, 0]
    assert abs(s + 1j) < 1e-12
    assert abs(abs(s) - 1) < 1e-14


def test_no_media_flux_equals_unitarity():
    r = io_transform(random_model(np.random.default_rng(1), 4, 2), 1.3)
    assert r.u.shape == (2, 0) and r.v.shape == (2, 0)
    assert r.flux_defect == r.unitarity_defect


def test_absorbing_scalar():
    w, k = 0.1, 0.06
    m = make_model([1.0], [[w]], kappa=[[k]])
    r = io_transform(m, 1.0)
    s2 = abs(r.s[0, 0]) ** 2
    assert abs(s2 - (k * k - w * w) ** 2 / (w * w + k * k) ** 2) < 1e-13
    assert abs(abs(r.u[0, 0]) ** 2 - (1 - s2)) < 1e-13


def test_amplifying_below_threshold_gain():
    m = make_model([1.0], [[0.1]], gamma=[[0.05]])
    r = io_transform(m, 1.0)
    assert np.min(np.linalg.eigvalsh(r.s @ r.s.conj().T)) >= 1.0


def test_above_threshold_is_singular():
    m = make_model([1.0], [[0.05]], gamma=[[0.1]])
    with pytest.raises(SingularResponse):
        io_transform(m, 1.0)
    pts = sweep(m, [0.9, 1.0])
    assert all(not p.ok and isinstance(p.error, SingularResponse) for p in pts)


def test_single_point_sweep():
    m = random_model(np.random.default_rng(2), 3, 2, n_abs=1)
    (p,) = sweep(m, [1.4])
    ref = io_transform(m, 1.4)
    assert p.ok and np.array_equal(p.result.s, ref.s)


def test_sweep_validation():
    m = make_model([1.0], [[0.1]])
    with pytest.raises(ValueError):
        sweep(m, [])
    with pytest.raises(ValueError):
        sweep(m, [1.2, 1.0])


def test_sweep_records_failures_and_continues():
    m = make_model([1.0, 2.0], [[0.0], [0.1]])
    pts = sweep(m, [0.5, 1.0, 1.5])
    assert [p.ok for p in pts] == [True, False, True]
    assert isinstance(pts[1].error, SingularResponse)


def test_sweep_threads_deterministic():
    m = random_model(np.random.default_rng(3), 6, 3)
    grid = np.linspace(0.9, 2.1, 50)
    a = sweep(m, grid, threads=1)
    b = sweep(m, grid, threads=4)
    assert all(np.array_equal(x.result.s, y.result.s) for x, y in zip(a, b))


def test_lossless_large_sweep():
    m = random_model(np.random.default_rng(4), 20, 4, scale=0.05)
    pts = sweep(m, np.linspace(0.8, 2.2, 2000))
    assert max(p.result.unitarity_defect for p in pts) < 1e-10


def test_phase_winding_across_resonance():
    w = 0.05
    m = make_model([1.0], [[w]])
    gamma = 2 * np.pi * w * w
    grid = np.linspace(1.0 - 400 * gamma, 1.0 + 400 * gamma, 4001)
    winding = phase_winding([s_matrix(m, x) for x in grid])
    # Breit-Wigner: S = (w - w1 - i G/2) / (w - w1 + i G/2), total change -2 (pi - 2 atan(2/800 ...))
    bw = lambda x: (x - 1.0 - 0.5j * gamma) / (x - 1.0 + 0.5j * gamma)
    ref = np.unwrap(np.angle([bw(grid[0]), *[bw(x) for x in grid[1:]]]))
    assert abs(winding - (ref[-1] - ref[0])) < 1e-10
    assert abs(abs(winding) - 2 * np.pi) < 0.01


@given(model_params(max_n=8, max_m=4), st.floats(0.5, 2.5))
def test_unitarity_lossless(params, w):
    n, m, seed, scale = params
    r = io_transform(random_model(np.random.default_rng(seed), n, m, scale, complex_w=True), w)
    assert r.unitarity_defect < 1e-10


@given(model_params(max_n=8, max_m=4), st.integers(0, 3), st.integers(0, 3), st.floats(0.5, 2.5))
def test_flux_identity(params, n_abs, n_amp, w):
    n, m, seed, scale = params
    model = random_model(np.random.default_rng(seed), n, m, scale, n_abs=n_abs, n_amp=n_amp)
    try:
        r = io_transform(model, w)
    except SingularResponse:
        return
    assert r.flux_defect < 1e-10
    eig = np.linalg.eigvalsh(np.eye(m) - r.s @ r.s.conj().T)
    if n_amp == 0:
        assert eig.min() >= -1e-10
    if n_abs == 0:
        assert eig.max() <= 1e-10


@given(model_params(max_n=8, max_m=4), st.floats(0.5, 2.5))
def test_reciprocity(params, w):
    n, m, seed, scale = params
    s = s_matrix(random_model(np.random.default_rng(seed), n, m, scale), w)
    assert np.max(np.abs(s - s.T)) < 1e-10
