import warnings

import numpy as np
import pytest
from hypothesis import given

from opencavity.errors import DegeneratePoleWarning, PoleRefinementError
from opencavity.resonances import (_d_matrix, biorthogonality_defect, effective_hamiltonian,
                                   find_poles, refine_pole, threshold_indicator)
from opencavity.scattering import s_matrix
from opencavity.spectrum import (CavityModel, CouplingModel, ModeSpectrum, build_coupling,
                                 build_mode_spectrum, make_model)

from conftest import model_params, random_model


def test_scalar_heff_and_pole():
    w = 0.1
    m = make_model([1.0], [[w]])
    assert abs(effective_hamiltonian(m).h[0, 0] - (1.0 - 1j * np.pi * w * w)) < 1e-15
    (p,) = find_poles(m)
    assert abs(p.pole - (1.0 - 1j * np.pi * w * w)) < 1e-14
    assert abs(p.width - 2 * np.pi * w * w) < 1e-14


def test_zero_coupling_heff():
    m = make_model([1.0, 1.5], np.zeros((2, 1)))
    h = effective_hamiltonian(m, 3.0).h
    assert np.array_equal(h, np.diag([1.0, 1.5]).astype(complex))
    poles = find_poles(m)
    assert all(p.pole.imag == 0 for p in poles)
    for p in poles:
        assert np.allclose(p.left, p.right)


def test_degenerate_pair_heff_and_poles():
    w, w0 = 0.1, 1.0
    m = CavityModel(ModeSpectrum([w0, w0]), CouplingModel("constant", np.array([[w], [w]])))
    h = effective_hamiltonian(m).h
    assert np.allclose(h, w0 * np.eye(2) - 1j * np.pi * w * w * np.ones((2, 2)), atol=1e-15)
    poles = find_poles(m)
    got = sorted(p.pole.imag for p in poles)
    assert abs(got[0] + 2 * np.pi * w * w) < 1e-12 and abs(got[1]) < 1e-12


def test_ensemble_trace_rule_n50():
    c = build_coupling("gaussian-random", 50, 2, sigma=0.01, seed=8)
    m = CavityModel(build_mode_spectrum("goe", n_modes=50, seed=8, center=1.0, half_width=0.3), c)
    widths = sum(p.width for p in find_poles(m))
    w = c.matrix
    expected = 2 * np.pi * np.trace(w @ w.conj().T).real
    assert abs(widths - expected) / expected < 1e-9


def test_degenerate_cluster_warning():
    # two identical uncoupled copies of a pole: exact degeneracy with nonzero width
    m = CavityModel(ModeSpectrum([1.0, 1.0]), build_coupling("constant", 2, 2, value=np.diag([0.1, 0.1])))
    with pytest.warns(DegeneratePoleWarning):
        poles = find_poles(m)
    assert all(p.degenerate for p in poles)
    assert biorthogonality_defect(poles) < 1e-9


def test_pole_matches_s_matrix_resonance():
    m = random_model(np.random.default_rng(6), 3, 1, scale=0.02, spread=1.0)
    grid = np.linspace(0.95, 2.05, 20001)
    step = grid[1] - grid[0]
    phase = np.unwrap([np.angle(s_matrix(m, x)[0, 0]) for x in grid])
    delay = np.gradient(phase, grid)
    for p in find_poles(m):
        window = np.abs(grid - p.frequency) < 5 * p.width
        peak = grid[window][np.argmax(np.abs(delay[window]))]
        assert abs(peak - p.frequency) <= step


def test_band_limited_newton_refine():
    c = build_coupling("band-limited", 3, 1, value=0.05, band=[0.5, 1.5], edge=0.05)
    m = CavityModel(ModeSpectrum([0.9, 1.0, 1.1]), c)
    poles = find_poles(m, method="newton-refine")
    for p in poles:
        # D evaluated with the level shift at Re z and the analytic Sigma at z
        d = _d_matrix(m, p.pole, True)
        assert np.min(np.abs(np.linalg.eigvals(d))) < 1e-10
    # the shift at band centre vanishes, so the middle pole stays at 1.0 in real part
    assert abs(poles[1].frequency - 1.0) < 1e-10


def test_refinement_failure():
    m = make_model([1.0], [[0.1]])
    with pytest.raises(PoleRefinementError) as info:
        refine_pole(m, 5.0 + 1j, max_iter=0)
    assert info.value.last_iterate is not None


def test_unknown_method():
    with pytest.raises(ValueError):
        find_poles(make_model([1.0], [[0.1]]), method="bisect")


def test_threshold_indicator():
    below = make_model([1.0], [[0.1]], gamma=[[0.05]])
    above = make_model([1.0], [[0.05]], gamma=[[0.1]])
    assert threshold_indicator(find_poles(below)) < 0
    assert threshold_indicator(find_poles(above)) > 0


def weak_damping_exponent(model, scales=(1, 0.5, 0.25, 0.125)):
    w = model.coupling.matrix
    first = np.pi * np.real(np.diag(w @ w.conj().T))
    errs = []
    for s in scales:
        poles = find_poles(model.scaled(s))
        z = np.array(sorted((p.pole for p in poles), key=lambda v: v.real))
        errs.append(np.max(np.abs(z - (model.spectrum.frequencies - 1j * first * s * s))))
    return np.polyfit(np.log(scales), np.log(errs), 1)[0]


def test_weak_damping_power_law():
    m = random_model(np.random.default_rng(9), 5, 2, scale=0.03, spread=1.0)
    assert abs(weak_damping_exponent(m) - 4.0) < 0.3


@given(model_params(max_n=8, max_m=4))
def test_biorthonormality_and_trace(params):
    n, m, seed, scale = params
    model = random_model(np.random.default_rng(seed), n, m, scale, complex_w=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneratePoleWarning)
        poles = find_poles(model)
    assert biorthogonality_defect(poles) < 1e-9
    assert all(abs(np.linalg.norm(p.right) - 1) < 1e-12 for p in poles)
    assert all(p.width >= -1e-10 for p in poles)
    sigma = model.sigma(1.0)
    total = sum(p.pole.imag for p in poles)
    assert abs(total + np.pi * np.trace(sigma).real) < 1e-12 * max(1.0, n)
    # real parts sorted
    re = [p.frequency for p in poles]
    assert re == sorted(re)
