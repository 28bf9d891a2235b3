"""Exact one-dimensional testbed.

A cavity [0, a] with a perfect mirror at x = 0 (u = 0), uniform interior
dielectric constant eps and a delta barrier of strength alpha at x = a:

    u'' + eps w^2 u = 0 inside,   u'' + w^2 u = 0 outside,
    u continuous,   u'(a+) - u'(a-) = alpha u(a).

The transfer-matrix solution gives the exact reflection amplitude
S(w) = -(f + i w s) / (f - i w s) with s = sin(n w a), c = cos(n w a),
n = sqrt(eps) and f = alpha s + n w c.

The mode decomposition splits the line at x = a. By default the interior
modes carry the barrier as a Robin condition u'(a) + alpha u(a) = 0
(tan(n w a) = -n w / alpha) and the channel functions vanish at x = a;
the coupling is then

    W_l(w) = u_l(a) sqrt(w / w_l) / sqrt(2 pi)

with u_l normalized as int_0^a eps u_l^2 dx = 1. ``swap_boundary=True``
uses Dirichlet interior modes and channel functions obeying
phi'(a) = alpha phi(a) instead. The level shift Delta is taken as zero
for both splits (its principal-value integral diverges for this coupling
and is absorbed in the mode frequencies).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import FitRejected, OpenCavityError, TruncationWarning
from .spectrum import CavityModel, CouplingModel, ModeSpectrum

# widths beyond this fraction of the local mode spacing leave the
# isolated-resonance regime the mode expansion is validated in
VALIDITY_RATIO = 0.3


@dataclass(frozen=True)
class Geometry1D:
    length: float
    barrier_strength: float
    eps_in: float = 1.0
    swap_boundary: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError("cavity length must be finite and positive")
        if not self.barrier_strength >= 0:
            raise ValueError("barrier strength must be >= 0 (inf for a closed cavity)")
        if not (math.isfinite(self.eps_in) and self.eps_in >= 1):
            raise ValueError("interior dielectric constant must be finite and >= 1")

    @property
    def index(self) -> float:
        return math.sqrt(self.eps_in)

    @property
    def closed(self) -> bool:
        return math.isinf(self.barrier_strength)

    @property
    def free_spectral_range(self) -> float:
        return math.pi / (self.index * self.length)


def _sfc(geom: Geometry1D, omega):
    n, a, alpha = geom.index, geom.length, geom.barrier_strength
    s = np.sin(n * omega * a)
    c = np.cos(n * omega * a)
    return s, alpha * s + n * omega * c, c


def transfer_matrix_s(geom: Geometry1D, omega):
    """Exact reflection amplitude of the cavity at real ``omega`` (> 0); vectorized."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("frequency must be positive")
    if geom.closed:
        return -np.ones_like(omega, dtype=complex)
    s, f, _ = _sfc(geom, omega)
    num = f + 1j * omega * s
    return -num / np.conj(num)


def reflection_phase(geom: Geometry1D, omega):
    """arg S in (-pi, 3 pi]: pi + 2 atan2(w s, f)."""
    omega = np.asarray(omega, dtype=float)
    if geom.closed:
        return np.full_like(omega, np.pi)
    s, f, _ = _sfc(geom, omega)
    return np.pi + 2 * np.arctan2(omega * s, f)


def wigner_delay(geom: Geometry1D, omega):
    """d arg S / d omega in closed form."""
    omega = np.asarray(omega, dtype=float)
    if geom.closed:
        return np.zeros_like(omega)
    n, a, alpha = geom.index, geom.length, geom.barrier_strength
    s, f, c = _sfc(geom, omega)
    y = omega * s
    dy = s + n * a * omega * c
    df = alpha * n * a * c + n * c - n * n * a * omega * s
    return 2 * (f * dy - y * df) / (f * f + y * y)


def transfer_matrix_pole(geom: Geometry1D, z0: complex, tol: float = 1e-13) -> complex:
    """Complex zero of f(z) - i z s(z) (the pole of S) near ``z0``."""
    n, a, alpha = geom.index, geom.length, geom.barrier_strength

    def g(z):
        s, c = np.sin(n * z * a), np.cos(n * z * a)
        return alpha * s + n * z * c - 1j * z * s

    def dg(z):
        s, c = np.sin(n * z * a), np.cos(n * z * a)
        return alpha * n * a * c + n * c - n * n * a * z * s - 1j * (s + n * a * z * c)

    return complex(optimize.newton(g, complex(z0), fprime=dg, tol=tol, maxiter=100))


def closed_frequencies(geom: Geometry1D, n_modes: int) -> np.ndarray:
    """Interior mode frequencies of the chosen boundary split."""
    if n_modes < 1:
        raise ValueError("need at least one mode")
    n, a, alpha = geom.index, geom.length, geom.barrier_strength
    lam = np.arange(1, n_modes + 1)
    if geom.closed or geom.swap_boundary:
        return lam * math.pi / (n * a)
    if alpha == 0:
        return (lam - 0.5) * math.pi / (n * a)
    # theta = n w a solves alpha a sin(theta) + theta cos(theta) = 0 on ((l - 1/2) pi, l pi]
    thetas = [optimize.brentq(lambda t: alpha * a * math.sin(t) + t * math.cos(t),
                              (k - 0.5) * math.pi, k * math.pi, xtol=1e-15, rtol=1e-15)
              for k in lam]
    return np.array(thetas) / (n * a)


def _boundary_values(geom: Geometry1D, freqs):
    """u_l(a) (default split) or u_l'(a) (swapped split) of the normalized interior modes."""
    n, a, eps = geom.index, geom.length, geom.eps_in
    theta = n * freqs * a
    if geom.swap_boundary:
        return math.sqrt(2 / (eps * a)) * n * freqs * np.cos(theta)
    if geom.closed:
        return np.zeros_like(freqs)
    norm2 = eps * (a / 2 - np.sin(2 * theta) / (4 * n * freqs))
    return np.sin(theta) / np.sqrt(norm2)


def analytic_coupling_1d(geom: Geometry1D, n_modes: int):
    """Mode frequencies and the frequency-dependent single-channel coupling.

    Returns ``(ModeSpectrum, CouplingModel)``; the coupling is an
    ``analytic-1d`` rule valid for complex arguments, with its derivative.
    Warns with :class:`TruncationWarning` when kept modes are broader than
    ``VALIDITY_RATIO`` of the local mode spacing.
    """
    freqs = closed_frequencies(geom, n_modes)
    edge = _boundary_values(geom, freqs)
    alpha = geom.barrier_strength

    if geom.swap_boundary:
        # W_l(z) = u_l'(a) phi_z(a) / (2 sqrt(z w_l)),  phi_z(a) = sqrt(2/pi) z / sqrt(alpha^2 + z^2)
        pref = edge / (2 * np.sqrt(freqs)) * math.sqrt(2 / math.pi)

        def rule(z):
            if geom.closed:
                return np.zeros((n_modes, 1), complex)
            z = complex(z)
            return (pref * np.sqrt(z) / np.sqrt(alpha ** 2 + z * z))[:, None]

        def rule_derivative(z):
            if geom.closed:
                return np.zeros((n_modes, 1), complex)
            z = complex(z)
            return rule(z) * (0.5 / z - z / (alpha ** 2 + z * z))
    else:
        pref = edge / np.sqrt(2 * math.pi * freqs)

        def rule(z):
            return (pref * np.sqrt(complex(z)))[:, None]

        def rule_derivative(z):
            return rule(z) * (0.5 / complex(z))

    at_modes = np.array([rule(w)[i, 0] for i, w in enumerate(freqs)])
    widths = 2 * math.pi * np.abs(at_modes) ** 2
    spacing = np.diff(np.concatenate([[0.0], freqs]))
    bad = np.flatnonzero(widths > VALIDITY_RATIO * spacing)
    if bad.size:
        warnings.warn(
            f"{bad.size} of {n_modes} kept modes (from mode {bad[0] + 1}) have widths above "
            f"{VALIDITY_RATIO} of the mode spacing; the expansion is outside its validity band",
            TruncationWarning, stacklevel=2)
    coupling = CouplingModel("analytic-1d", at_modes[:, None], rule=rule, rule_derivative=rule_derivative)
    return ModeSpectrum(freqs), coupling


def cavity_model_1d(geom: Geometry1D, n_modes: int) -> CavityModel:
    spectrum, coupling = analytic_coupling_1d(geom, n_modes)
    return CavityModel(spectrum, coupling)


# --- oracle: Lorentzian fit of the Wigner delay ---------------------------------

@dataclass(frozen=True)
class DelayFit:
    frequency: float
    width: float
    amplitude: float
    r2: float


def _lorentzian(w, w0, gamma, amp, b0, b1):
    return amp * gamma / ((w - w0) ** 2 + 0.25 * gamma ** 2) + b0 + b1 * (w - w0)


def fit_delay_peak(geom: Geometry1D, center: float, gamma_guess: float,
                   half_window: float = 6.0, n_points: int = 801) -> DelayFit:
    """Fit tau(w) = A G / ((w - w_k)^2 + G^2/4) + b0 + b1 (w - w_k) around one peak.

    ``center`` and ``gamma_guess`` only position the fit window; they come
    from the delay curve itself in :func:`delay_peaks`.
    """
    # stay within the peak's own free spectral range
    reach = min(half_window * gamma_guess, 0.45 * geom.free_spectral_range)
    w = np.linspace(max(center - reach, 1e-12), center + reach, n_points)
    tau = wigner_delay(geom, w)
    p0 = (center, gamma_guess, 1.0, 0.0, 0.0)
    try:
        with warnings.catch_warnings():
            # the covariance is not used; quality is judged by R^2 below
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            p, _ = optimize.curve_fit(_lorentzian, w, tau, p0=p0, xtol=1e-14, ftol=1e-14, maxfev=20000)
    except RuntimeError as exc:
        raise FitRejected(f"Lorentzian fit near {center:.6g} failed: {exc}", {"center": center}) from exc
    resid = tau - _lorentzian(w, *p)
    r2 = 1.0 - np.sum(resid ** 2) / np.sum((tau - tau.mean()) ** 2)
    if not (p[1] > 0 and r2 > 0.99):
        raise FitRejected(f"delay peak near {center:.6g} is not Lorentzian (R^2 = {r2:.5f})",
                          {"center": center, "r2": r2, "params": p.tolist()})
    return DelayFit(float(p[0]), float(p[1]), float(p[2]), float(r2))


def delay_peaks(geom: Geometry1D, n_peaks: int, points_per_fsr: int = 20000) -> list:
    """Locate the first ``n_peaks`` Wigner-delay maxima and estimate their half widths.

    Scans one free spectral range at a time from w = 0; the peak in each
    range is refined by a golden-section search and its FWHM measured on
    the delay curve.
    """
    fsr = geom.free_spectral_range
    out = []
    start = 1e-9 * fsr
    while len(out) < n_peaks:
        w = np.linspace(start, start + fsr, points_per_fsr)
        tau = wigner_delay(geom, w)
        k = int(np.argmax(tau))
        if 0 < k < w.size - 1:
            res = optimize.minimize_scalar(lambda x: -wigner_delay(geom, x), bracket=(w[k - 1], w[k], w[k + 1]),
                                           tol=1e-14)
            peak = float(res.x)
            top = float(wigner_delay(geom, peak))
            half = 0.5 * top
            # FWHM from the half-maximum crossings; broad peaks sitting on a
            # large background may never drop to half height within the range
            try:
                right = optimize.brentq(lambda x: wigner_delay(geom, x) - half, peak,
                                        peak + 0.5 * fsr, xtol=1e-15)
                left_lo = max(peak - 0.5 * fsr, 1e-12)
                left = optimize.brentq(lambda x: wigner_delay(geom, x) - half, left_lo, peak, xtol=1e-15)
                fwhm = right - left
            except ValueError:
                fwhm = 0.1 * fsr
            if not out or peak - out[-1][0] > 0.25 * fsr:
                out.append((peak, fwhm))
            start = peak + 0.5 * fsr
        else:
            start = start + 0.5 * fsr
    return out[:n_peaks]


@dataclass
class ResonanceComparison:
    rows: list
    max_position_error: float
    max_width_error: float
    fsr: float
    failures: list = field(default_factory=list)

    COLUMNS = ("index", "omega_tm", "gamma_tm", "omega_poles", "gamma_poles",
               "position_error_fsr", "width_error_rel", "omega_exact", "gamma_exact")


def compare_resonances(geom: Geometry1D, n_modes: int, n_compare: int = None,
                       method: str = "newton-refine") -> ResonanceComparison:
    """Tabulate transfer-matrix resonances against the mode-expansion poles.

    Transfer-matrix values come from Lorentzian fits of the Wigner delay;
    the exact complex zero of the transfer-matrix denominator is listed as
    a cross-check. Position errors are in units of the free spectral range,
    width errors relative to the fitted width. Fit failures are kept as
    rows with NaN entries and listed in ``failures``.
    """
    from .resonances import find_poles

    n_compare = n_modes if n_compare is None else min(n_compare, n_modes)
    fsr = geom.free_spectral_range
    poles = find_poles(cavity_model_1d(geom, n_modes), method=method)
    rows, failures = [], []

    if geom.closed:
        freqs = closed_frequencies(geom, n_compare)
        for i in range(n_compare):
            p = poles[i]
            rows.append(dict(index=i + 1, omega_tm=freqs[i], gamma_tm=0.0, omega_poles=p.frequency,
                             gamma_poles=p.width, position_error_fsr=abs(p.frequency - freqs[i]) / fsr,
                             width_error_rel=abs(p.width), omega_exact=freqs[i], gamma_exact=0.0))
    else:
        peaks = delay_peaks(geom, n_compare)
        for i, (center, fwhm) in enumerate(peaks):
            p = poles[i]
            row = dict(index=i + 1, omega_poles=p.frequency, gamma_poles=p.width)
            try:
                fit = fit_delay_peak(geom, center, fwhm)
                row.update(omega_tm=fit.frequency, gamma_tm=fit.width,
                           position_error_fsr=abs(p.frequency - fit.frequency) / fsr,
                           width_error_rel=abs(p.width - fit.width) / fit.width)
            except OpenCavityError as exc:
                failures.append((i + 1, str(exc)))
                row.update(omega_tm=math.nan, gamma_tm=math.nan,
                           position_error_fsr=math.nan, width_error_rel=math.nan)
            try:
                z = transfer_matrix_pole(geom, complex(center, -0.5 * fwhm))
                row.update(omega_exact=z.real, gamma_exact=-2 * z.imag)
            except RuntimeError:
                row.update(omega_exact=math.nan, gamma_exact=math.nan)
            rows.append(row)

    pos = [r["position_error_fsr"] for r in rows if not math.isnan(r["position_error_fsr"])]
    wid = [r["width_error_rel"] for r in rows if not math.isnan(r["width_error_rel"])]
    return ResonanceComparison(rows, max(pos, default=math.nan), max(wid, default=math.nan), fsr, failures)
