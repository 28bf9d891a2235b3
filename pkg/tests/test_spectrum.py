import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opencavity.errors import DimensionError, InvalidCoupling, InvalidSpectrum
from opencavity.rmt import semicircle_cdf
from opencavity.spectrum import (CavityModel, CouplingModel, MediaCouplings, ModeSpectrum,
                                 build_coupling, build_mode_spectrum, raised_cosine_window)


def test_comb():
    s = build_mode_spectrum("comb", omega_min=1.0, spacing=1.0, n_modes=3)
    assert s.frequencies.tolist() == [1.0, 2.0, 3.0]


def test_explicit_identity():
    assert build_mode_spectrum("explicit", frequencies=[5.0]).frequencies.tolist() == [5.0]


@pytest.mark.parametrize("freqs", [[0.0, 1.0], [-1.0], [2.0, 1.0], [1.0, np.inf], []])
def test_invalid_spectra(freqs):
    with pytest.raises(InvalidSpectrum):
        ModeSpectrum(freqs)


def test_comb_rejects_nonpositive():
    with pytest.raises(InvalidSpectrum):
        build_mode_spectrum("comb", omega_min=0.0, spacing=1.0, n_modes=3)
    with pytest.raises(InvalidSpectrum):
        build_mode_spectrum("comb", omega_min=1.0, spacing=-1.0, n_modes=3)


def test_spectrum_is_read_only():
    s = ModeSpectrum([1.0, 2.0])
    with pytest.raises(ValueError):
        s.frequencies[0] = 3.0


def test_goe_band_and_determinism():
    a = build_mode_spectrum("goe", n_modes=200, seed=7, center=100.0, half_width=10.0)
    b = build_mode_spectrum("goe", n_modes=200, seed=7, center=100.0, half_width=10.0)
    assert len(a) == 200
    assert np.all((a.frequencies >= 90.0) & (a.frequencies <= 110.0))
    assert np.array_equal(a.frequencies, b.frequencies)


def test_goe_density_approaches_semicircle():
    # l1 distance between the pooled histogram and the semicircle shrinks with ensemble size
    edges = np.linspace(-1, 1, 21)
    expected = np.diff(semicircle_cdf(edges))

    def distance(n_samples):
        x = np.concatenate([build_mode_spectrum("goe", n_modes=100, seed=3, center=0.0 + 2.0,
                                                half_width=1.0, index=i).frequencies - 2.0
                            for i in range(n_samples)])
        h, _ = np.histogram(x, bins=edges)
        return np.abs(h / x.size - expected).sum()

    assert distance(40) < distance(2)


def test_constant_coupling():
    c = build_coupling("constant", 1, 1, value=0.1)
    assert np.array_equal(c(0.3), [[0.1]])
    assert np.array_equal(c(7.0), c(0.3))
    assert c.is_markov


def test_gaussian_random_determinism():
    a = build_coupling("gaussian-random", 2, 3, sigma=0.05, seed=1)
    b = build_coupling("gaussian-random", 2, 3, sigma=0.05, seed=1)
    assert a(1.0).shape == (2, 3)
    assert np.array_equal(a(1.0), b(1.0))
    assert np.all(a(1.0).imag == 0)


@pytest.mark.parametrize("params", [dict(sigma=0.0, seed=1), dict(sigma=-1.0, seed=1), dict(sigma=0.1)])
def test_gaussian_random_rejects(params):
    with pytest.raises(InvalidCoupling):
        build_coupling("gaussian-random", 2, 2, **params)


def test_band_limited_support():
    c = build_coupling("band-limited", 1, 1, value=0.1, band=[0.5, 1.5])
    assert np.array_equal(c(2.0), [[0.0]])
    assert np.array_equal(c(1.0), [[0.1]])
    assert not c.is_markov
    with pytest.raises(InvalidCoupling):
        build_coupling("band-limited", 1, 1, value=0.1, band=[1.5, 0.5])


@given(st.floats(-1.0, 3.0), st.floats(0.0, 0.4))
def test_window_is_bounded_and_one_inside(x, edge):
    band = (0.0, 2.0)
    v = raised_cosine_window(x, band, edge)
    assert 0.0 <= v <= 1.0
    if band[0] + edge <= x <= band[1] - edge and band[0] < x < band[1]:
        assert v == 1.0
    if not band[0] <= x <= band[1]:
        assert v == 0.0


def test_unknown_kinds():
    with pytest.raises(InvalidSpectrum):
        build_mode_spectrum("lattice", n_modes=2)
    with pytest.raises(InvalidCoupling):
        build_coupling("wavy", 1, 1)
    with pytest.raises(InvalidCoupling):
        CouplingModel("analytic-1d", np.zeros((1, 1)))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        CavityModel(ModeSpectrum([1.0, 2.0]), CouplingModel("constant", np.ones((3, 1))))
    with pytest.raises(DimensionError):
        CavityModel(ModeSpectrum([1.0, 2.0]), CouplingModel("constant", np.ones((2, 1))),
                    MediaCouplings(kappa=np.ones((3, 1))))


def test_media_empty_shapes():
    m = CavityModel(ModeSpectrum([1.0, 2.0]), CouplingModel("constant", np.ones((2, 1))))
    assert m.kappa.shape == (2, 0) and m.gamma.shape == (2, 0)
    with pytest.raises(InvalidCoupling):
        MediaCouplings(n_abs=-1.0)
