"""Cavity mode spectra, channel couplings and the model bundle built from them.

Units are c = hbar = 1 throughout, so frequencies, rates and coupling
amplitudes are plain dimensionless numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidCoupling, InvalidSpectrum

COUPLING_KINDS = ("constant", "gaussian-random", "band-limited", "analytic-1d")


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    """Sorted, strictly positive closed-cavity mode frequencies."""

    frequencies: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        if w.ndim != 1 or w.size == 0:
            raise InvalidSpectrum("a mode spectrum needs at least one frequency")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidSpectrum("mode frequencies must be finite and strictly positive")
        if np.any(np.diff(w) < 0):
            raise InvalidSpectrum("mode frequencies must be sorted ascending")
        object.__setattr__(self, "frequencies", _frozen(w, float))

    def __len__(self):
        return self.frequencies.size

    @property
    def n_modes(self) -> int:
        return self.frequencies.size


def raised_cosine_window(omega, band, edge):
    """Smooth band indicator: 1 inside ``band`` shrunk by ``edge`` on each side, 0 outside.

    ``edge = 0`` gives a hard rectangular window.
    """
    lo, hi = band
    x = np.asarray(omega, dtype=float)
    out = np.where((x >= lo) & (x <= hi), 1.0, 0.0)
    if edge > 0:
        left = (x >= lo) & (x < lo + edge)
        right = (x > hi - edge) & (x <= hi)
        with np.errstate(over="ignore"):
            tl = np.clip((x - lo) / edge, 0.0, 1.0)
            tr = np.clip((hi - x) / edge, 0.0, 1.0)
        out = np.where(left, 0.5 * (1.0 - np.cos(np.pi * tl)), out)
        out = np.where(right, 0.5 * (1.0 - np.cos(np.pi * tr)), out)
    return out if out.ndim else float(out)


def raised_cosine_window_derivative(omega, band, edge):
    lo, hi = band
    x = np.asarray(omega, dtype=float)
    out = np.zeros_like(x)
    if edge > 0:
        left = (x >= lo) & (x < lo + edge)
        right = (x > hi - edge) & (x <= hi)
        k = np.pi / edge
        with np.errstate(over="ignore"):
            tl = np.clip((x - lo) / edge, 0.0, 1.0)
            tr = np.clip((hi - x) / edge, 0.0, 1.0)
        out = np.where(left, 0.5 * k * np.sin(np.pi * tl), out)
        out = np.where(right, -0.5 * k * np.sin(np.pi * tr), out)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class CouplingModel:
    """Mode-to-channel coupling amplitudes W(omega), an N x M matrix.

    ``matrix`` is the stored amplitude. For the frequency-dependent kinds
    the value at ``omega`` is ``matrix * window(omega)`` (band-limited) or
    ``rule(omega)`` (analytic-1d). Complex arguments are accepted by the
    analytic-1d rule; band-limited windows are evaluated at the real part.
    """

    kind: str
    matrix: np.ndarray
    band: Optional[tuple] = None
    edge: float = 0.0
    seed: Optional[int] = None
    rule: Optional[Callable] = field(default=None, repr=False)
    rule_derivative: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in COUPLING_KINDS:
            raise InvalidCoupling(f"unknown coupling kind {self.kind!r}")
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or min(m.shape) < 1:
            raise InvalidCoupling("coupling matrix must be N x M with N, M >= 1")
        if not np.all(np.isfinite(m)):
            raise InvalidCoupling("coupling matrix has non-finite entries")
        object.__setattr__(self, "matrix", _frozen(m))
        if self.kind == "band-limited":
            if self.band is None:
                raise InvalidCoupling("band-limited coupling needs a band")
            lo, hi = map(float, self.band)
            if not lo < hi:
                raise InvalidCoupling(f"band must satisfy lo < hi, got [{lo}, {hi}]")
            if self.edge < 0 or 2 * self.edge > hi - lo:
                raise InvalidCoupling("window edge width must lie in [0, (hi - lo)/2]")
            object.__setattr__(self, "band", (lo, hi))
        if self.kind == "analytic-1d" and self.rule is None:
            raise InvalidCoupling("analytic-1d coupling needs a rule")

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_markov(self) -> bool:
        """True when W does not depend on frequency."""
        return self.kind in ("constant", "gaussian-random")

    def window(self, omega):
        if self.kind != "band-limited":
            return 1.0
        return raised_cosine_window(np.real(omega), self.band, self.edge)

    def __call__(self, omega) -> np.ndarray:
        if self.kind == "analytic-1d":
            return np.asarray(self.rule(omega), dtype=complex)
        if self.kind == "band-limited":
            return self.matrix * self.window(omega)
        return self.matrix

    def derivative(self, omega) -> np.ndarray:
        """dW/domega; finite differences when the rule carries no derivative."""
        if self.kind == "analytic-1d":
            if self.rule_derivative is not None:
                return np.asarray(self.rule_derivative(omega), dtype=complex)
            h = 1e-6 * max(1.0, abs(omega))
            return (self.rule(omega + h) - self.rule(omega - h)) / (2 * h)
        if self.kind == "band-limited":
            return self.matrix * raised_cosine_window_derivative(np.real(omega), self.band, self.edge)
        return np.zeros_like(self.matrix)

    def conj_continued(self, z) -> np.ndarray:
        """conj(W(conj z)): the analytic partner of W(z)^* off the real axis."""
        return np.conj(self(np.conj(z)))


@dataclass(frozen=True, eq=False)
class MediaCouplings:
    """Couplings to absorbing (kappa, N x L) and amplifying (gamma, N x K) baths.

    Both are frequency independent; they enter the response only through
    the damping matrix.
    """

    kappa: np.ndarray = None
    gamma: np.ndarray = None
    n_abs: float = 0.0
    n_amp: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "gamma"):
            v = getattr(self, name)
            a = np.zeros((0, 0), dtype=complex) if v is None else np.array(v, dtype=complex)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2:
                raise InvalidCoupling(f"{name} must be a 2-d matrix")
            object.__setattr__(self, name, _frozen(a))
        if self.n_abs < 0 or self.n_amp < 0:
            raise InvalidCoupling("bath occupations must be >= 0")

    @property
    def n_absorbing(self) -> int:
        return self.kappa.shape[1] if self.kappa.size else 0

    @property
    def n_amplifying(self) -> int:
        return self.gamma.shape[1] if self.gamma.size else 0

    def kappa_matrix(self, n_modes):
        return self.kappa if self.kappa.size else np.zeros((n_modes, 0), dtype=complex)

    def gamma_matrix(self, n_modes):
        return self.gamma if self.gamma.size else np.zeros((n_modes, 0), dtype=complex)


@dataclass(frozen=True, eq=False)
class CavityModel:
    """Everything that defines an open cavity: modes, channels and media."""

    spectrum: ModeSpectrum
    coupling: CouplingModel
    media: Optional[MediaCouplings] = None
    pv_tol: float = 1e-9

    def __post_init__(self):
        n = self.spectrum.n_modes
        if self.coupling.n_modes != n:
            raise DimensionError(
                f"coupling has {self.coupling.n_modes} mode rows but the spectrum has {n} modes")
        if self.media is not None:
            for name, mat in (("kappa", self.media.kappa), ("gamma", self.media.gamma)):
                if mat.size and mat.shape[0] != n:
                    raise DimensionError(f"{name} has {mat.shape[0]} rows, expected {n}")

    @property
    def n_modes(self) -> int:
        return self.spectrum.n_modes

    @property
    def n_channels(self) -> int:
        return self.coupling.n_channels

    @property
    def kappa(self) -> np.ndarray:
        if self.media is None:
            return np.zeros((self.n_modes, 0), dtype=complex)
        return self.media.kappa_matrix(self.n_modes)

    @property
    def gamma(self) -> np.ndarray:
        if self.media is None:
            return np.zeros((self.n_modes, 0), dtype=complex)
        return self.media.gamma_matrix(self.n_modes)

    @property
    def is_markov(self) -> bool:
        return self.coupling.is_markov

    def media_sigma(self) -> np.ndarray:
        k, g = self.kappa, self.gamma
        return k @ k.conj().T - g @ g.conj().T

    def sigma(self, omega) -> np.ndarray:
        """Damping matrix W W^+ + K K^+ - G G^+ at frequency ``omega``.

        For complex ``omega`` the analytic continuation W(z) conj(W(conj z))^T
        is used, so the result is no longer Hermitian off the real axis.
        """
        w = self.coupling(omega)
        if np.iscomplexobj(omega) and np.imag(omega) != 0:
            wt = self.coupling.conj_continued(omega)
            return w @ wt.T + self.media_sigma()
        return w @ w.conj().T + self.media_sigma()

    def sigma_derivative(self, z) -> np.ndarray:
        if self.coupling.is_markov:
            return np.zeros((self.n_modes, self.n_modes), dtype=complex)
        w = self.coupling(z)
        dw = self.coupling.derivative(z)
        wt = self.coupling.conj_continued(z)
        dwt = np.conj(self.coupling.derivative(np.conj(z)))
        return dw @ wt.T + w @ dwt.T

    def scaled(self, s: float) -> "CavityModel":
        """Same model with every coupling amplitude multiplied by ``s``."""
        c = self.coupling
        if c.kind == "analytic-1d":
            rule, drule = c.rule, c.rule_derivative
            coupling = CouplingModel(
                c.kind, c.matrix * s, c.band, c.edge, c.seed,
                rule=lambda z: s * rule(z),
                rule_derivative=None if drule is None else (lambda z: s * drule(z)))
        else:
            coupling = CouplingModel(c.kind, c.matrix * s, c.band, c.edge, c.seed)
        media = None
        if self.media is not None:
            m = self.media
            media = MediaCouplings(m.kappa * s if m.kappa.size else None,
                                   m.gamma * s if m.gamma.size else None, m.n_abs, m.n_amp)
        return CavityModel(self.spectrum, coupling, media, self.pv_tol)


def build_mode_spectrum(kind: str, **params) -> ModeSpectrum:
    """Build a mode spectrum.

    Parameters
    ----------
    kind : {"comb", "explicit", "goe"}
        ``comb`` takes ``omega_min``, ``spacing`` and ``n_modes``;
        ``explicit`` takes ``frequencies``; ``goe`` takes ``n_modes``,
        ``seed``, ``center`` and ``half_width`` (and optionally ``index``
        selecting an independent draw from the same seed).
    """
    if kind == "comb":
        w0, dw, n = params["omega_min"], params["spacing"], int(params["n_modes"])
        if w0 <= 0 or dw <= 0 or n < 1:
            raise InvalidSpectrum("comb needs omega_min > 0, spacing > 0 and n_modes >= 1")
        return ModeSpectrum(w0 + dw * np.arange(n))
    if kind == "explicit":
        return ModeSpectrum(params["frequencies"])
    if kind == "goe":
        from .rmt import goe_frequencies

        center, hw = params["center"], params["half_width"]
        if hw <= 0 or center - hw <= 0:
            raise InvalidSpectrum("goe band [center - half_width, center + half_width] must be positive")
        return ModeSpectrum(goe_frequencies(int(params["n_modes"]), params["seed"], center, hw,
                                            index=params.get("index", 0)))
    raise InvalidSpectrum(f"unknown spectrum kind {kind!r}")


def build_coupling(kind: str, n_modes: int, n_channels: int, **params) -> CouplingModel:
    """Build a coupling model.

    ``constant`` takes ``value`` (scalar broadcast to N x M, or a full
    matrix). ``gaussian-random`` draws i.i.d. real N(0, sigma^2) entries
    from ``seed``. ``band-limited`` multiplies a constant ``value`` (or a
    gaussian-random draw when ``sigma`` and ``seed`` are given) by a
    raised-cosine window over ``band`` with edge width ``edge``.
    """
    if n_modes < 1 or n_channels < 1:
        raise InvalidCoupling("need at least one mode and one channel")
    shape = (n_modes, n_channels)

    def _value():
        v = np.asarray(params.get("value", 0.0), dtype=complex)
        if v.ndim == 0:
            return np.full(shape, v, dtype=complex)
        if v.shape != shape:
            raise InvalidCoupling(f"coupling value has shape {v.shape}, expected {shape}")
        return v

    def _gaussian():
        sigma = params.get("sigma")
        if sigma is None or sigma <= 0:
            raise InvalidCoupling("gaussian-random coupling needs sigma > 0")
        seed = params.get("seed")
        if seed is None:
            raise InvalidCoupling("gaussian-random coupling needs a seed")
        rng = params.get("rng") or np.random.default_rng(seed)
        return rng.normal(0.0, sigma, size=shape).astype(complex)

    if kind == "constant":
        return CouplingModel("constant", _value())
    if kind == "gaussian-random":
        return CouplingModel("gaussian-random", _gaussian(), seed=params.get("seed"))
    if kind == "band-limited":
        band = params.get("band")
        if band is None or len(band) != 2:
            raise InvalidCoupling("band-limited coupling needs band = [lo, hi]")
        if band[0] >= band[1]:
            raise InvalidCoupling(f"band must satisfy lo < hi, got {list(band)}")
        base = _gaussian() if params.get("sigma") is not None else _value()
        edge = params.get("edge")
        if edge is None:
            edge = 0.05 * (band[1] - band[0])
        return CouplingModel("band-limited", base, band=tuple(band), edge=float(edge),
                             seed=params.get("seed"))
    if kind == "analytic-1d":
        raise InvalidCoupling("analytic-1d couplings are built by toy1d.analytic_coupling_1d")
    raise InvalidCoupling(f"unknown coupling kind {kind!r}")


def make_model(frequencies: Sequence[float], w, kappa=None, gamma=None,
               n_abs: float = 0.0, n_amp: float = 0.0) -> CavityModel:
    """Shorthand for a Markov model with explicit frequencies and coupling matrix."""
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    spectrum = ModeSpectrum(frequencies)
    media = None
    if kappa is not None or gamma is not None:
        media = MediaCouplings(kappa, gamma, n_abs, n_amp)
    return CavityModel(spectrum, CouplingModel("constant", w), media)
