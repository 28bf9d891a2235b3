"""Spontaneous decay of a two-level atom inside the open cavity.

The atom couples to mode l with amplitude g_l = -i sqrt(omega0 / 2) eta_l,
eta_l being the dipole-projected mode function at the atom position (the
dipole magnitude is folded into eta). All three estimators evaluate the
same contraction eta^T D^-1(omega0) eta^*; the oracle integrates the
single-excitation Schroedinger equation with a discretized channel
continuum and fits the exponential decay.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.sparse import linalg as sparse_linalg

from .errors import BathTooCoarse, DegeneratePoleWarning, FitRejected
from .resonances import find_poles
from .response import evaluate_D, solve_response
from .spectrum import CavityModel


@dataclass(frozen=True, eq=False)
class AtomSpec:
    omega0: float
    eta: np.ndarray

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("atomic transition frequency must be positive")
        eta = np.atleast_1d(np.asarray(self.eta, dtype=complex))
        if not np.all(np.isfinite(eta)):
            raise ValueError("eta must be finite")
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class DecayResult:
    gamma: float
    ldos: float
    method: str
    shift: float = float("nan")
    diagnostics: dict = field(default_factory=dict, compare=False)


def _contraction(model: CavityModel, atom: AtomSpec) -> complex:
    d = evaluate_D(model, atom.omega0).d
    x = solve_response(d, atom.eta.conj(), atom.omega0)
    return complex(atom.eta @ x)


def decay_rate_direct(model: CavityModel, atom: AtomSpec) -> DecayResult:
    """gamma = -omega0 Im[eta^T D^-1(omega0) eta^*].

    ``shift`` is the rotating-wave line shift +omega0/2 Re[eta^T D^-1 eta^*],
    the real part of the atomic self-energy whose imaginary part gives
    -gamma/2.
    """
    if not np.any(atom.eta):
        return DecayResult(0.0, 0.0, "direct", 0.0)
    c = _contraction(model, atom)
    gamma = -atom.omega0 * c.imag
    return DecayResult(gamma, gamma / (np.pi * atom.omega0), "direct", 0.5 * atom.omega0 * c.real)


def _pole_weights(model, atom):
    with warnings.catch_warnings():
        warnings.simplefilter("error", DegeneratePoleWarning)
        poles = find_poles(model)
    z = np.array([p.pole for p in poles])
    weights = np.array([(p.right @ atom.eta) * (p.left.conj() @ atom.eta.conj()) for p in poles])
    return z, weights


def _fallback(model, atom, method):
    warnings.warn(f"degenerate poles: {method} estimator falls back to the direct method",
                  DegeneratePoleWarning, stacklevel=3)
    r = decay_rate_direct(model, atom)
    return DecayResult(r.gamma, r.ldos, "direct", r.shift, {"fallback_from": method})


def decay_rate_modes(model: CavityModel, atom: AtomSpec) -> DecayResult:
    """Spectral sum over biorthonormal left/right resonance modes.

    rho = (1/pi) Im sum_k (L_k . eta)^* (R_k . eta) / (w_k - omega0 - i Gamma_k/2),
    gamma = pi omega0 rho.
    """
    if not np.any(atom.eta):
        return DecayResult(0.0, 0.0, "modes", 0.0)
    try:
        z, weights = _pole_weights(model, atom)
    except DegeneratePoleWarning:
        return _fallback(model, atom, "modes")
    terms = weights / (z - atom.omega0)
    rho = float(np.sum(terms).imag / np.pi)
    shift = 0.5 * atom.omega0 * float(np.sum(-terms).real)
    return DecayResult(np.pi * atom.omega0 * rho, rho, "modes", shift,
                       {"terms": terms, "poles": z})


def decay_rate_nonrwa(model: CavityModel, atom: AtomSpec) -> DecayResult:
    """Estimator without the rotating-wave approximation for the field.

    rho = (2 omega0 / pi) Im sum_k (l_k . eta)^* (r_k . eta) / (sigma_k - omega0^2)
    with sigma_k = (w_k - i Gamma_k / 2)^2 built from the RWA poles and
    l_k, r_k the RWA left/right vectors. Reduces to the modes estimator
    when Gamma_k / omega0 -> 0.
    """
    if not np.any(atom.eta):
        return DecayResult(0.0, 0.0, "nonrwa", 0.0)
    try:
        z, weights = _pole_weights(model, atom)
    except DegeneratePoleWarning:
        return _fallback(model, atom, "nonrwa")
    w0 = atom.omega0
    rho = float(2 * w0 / np.pi * np.sum(weights / (z ** 2 - w0 ** 2)).imag)
    return DecayResult(np.pi * w0 * rho, rho, "nonrwa")


def ldos_pole_integral(model: CavityModel, atom: AtomSpec, lo: float, hi: float) -> float:
    """Closed-form integral of the pole expansion of rho(omega) over [lo, hi].

    int (1/pi) Im[c / (z - w)] dw = (1/pi) Im[c (log(z - lo) - log(z - hi))].
    """
    z, weights = _pole_weights(model, atom)
    return float(np.sum(weights * (np.log(z - lo) - np.log(z - hi))).imag / np.pi)


# --- discretized-bath oracle -------------------------------------------------

POPULATION_FLOOR = 1e-6


class ChebyshevPropagator:
    """exp(-i H tau) applied by a Chebyshev series in the scaled Hamiltonian.

    The spectral interval is bracketed with Lanczos estimates of the extreme
    eigenvalues (padded by 5%); the series is cut once the Bessel
    coefficients fall below ``tol``.
    """

    def __init__(self, apply_h, size, tau, tol=1e-14):
        op = sparse_linalg.LinearOperator((size, size), matvec=apply_h, dtype=complex)
        hi = sparse_linalg.eigsh(op, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]
        lo = sparse_linalg.eigsh(op, k=1, which="SA", return_eigenvectors=False, tol=1e-6)[0]
        pad = 0.05 * (hi - lo) + 1e-12
        self.center = 0.5 * (hi + lo)
        self.radius = 0.5 * (hi - lo) + pad
        self.apply_h = apply_h
        x = self.radius * tau
        order = int(x + 10 * max(1.0, x ** (1 / 3)) + 10)
        coef = special.jv(np.arange(order + 1), x)
        while order > 1 and abs(coef[order]) < tol and abs(coef[order - 1]) < tol:
            order -= 1
        self.order = order
        k = np.arange(order + 1)
        self.coef = np.where(k == 0, 1.0, 2.0) * (-1j) ** k * coef[:order + 1] * np.exp(-1j * self.center * tau)

    def _scaled(self, v):
        return (self.apply_h(v) - self.center * v) / self.radius

    def __call__(self, v):
        prev, cur = v, self._scaled(v)
        out = self.coef[0] * prev + self.coef[1] * cur
        for k in range(2, self.order + 1):
            prev, cur = cur, 2 * self._scaled(cur) - prev
            out += self.coef[k] * cur
        return out


def _default_band(model, atom, margin):
    poles = find_poles(model)
    widths = np.array([max(p.width, 0.0) for p in poles])
    gmax = max(widths.max(), 1e-12)
    reach = max(abs(p.frequency - atom.omega0) for p in poles)
    half = reach + margin * gmax
    return (atom.omega0 - half, atom.omega0 + half)


def wigner_weisskopf_oracle(model: CavityModel, atom: AtomSpec, n_bins: int = 10_000,
                            band=None, t_max: float = None, margin: float = 20.0,
                            n_samples: int = 600, r2_min: float = 0.999) -> DecayResult:
    """Brute-force decay rate from a discretized channel continuum.

    Each channel is replaced by ``n_bins`` oscillators on a uniform grid over
    ``band`` with couplings W(omega_j) sqrt(bin width). The linear
    single-excitation amplitudes (atom, cavity modes, bins) are propagated
    exactly in a frame rotating at omega0 by a Chebyshev expansion of
    exp(-i H tau) whose order adapts to the requested accuracy, and
    ln|c(t)|^2 on the fit window is fitted by a straight line.

    The default band is centred on omega0 and covers every pole plus
    ``margin`` of the largest width. The fit window starts after five
    optical periods and after the cavity transients (four inverse widths of
    the narrowest resonance) and ends at half the recurrence time
    2 pi / bin_width, or earlier once the population drops below 1e-6.
    """
    if not model.is_markov:
        raise ValueError("the discretized-bath oracle needs frequency-independent couplings")
    if n_bins < 1000:
        raise BathTooCoarse("need at least 1000 bath bins")
    eta = atom.eta
    w0 = atom.omega0
    if band is None:
        band = _default_band(model, atom, margin)
    lo, hi = band
    step = (hi - lo) / n_bins
    grid = lo + step * (np.arange(n_bins) + 0.5)
    t_rec = 2 * np.pi / step
    poles = find_poles(model)

    if not np.any(eta):
        raise FitRejected("atom is uncoupled: |c(t)| = 1, nothing to fit", {"gamma": 0.0})

    t_start = 5 * 2 * np.pi / w0
    relevant = [p.width for p in poles if p.width > 1e-12]
    if relevant:
        t_start = max(t_start, 4.0 / min(relevant))
    t_end = 0.5 * t_rec
    if t_max is not None:
        t_end = min(t_end, t_max)
    if t_end <= t_start * 1.5:
        raise BathTooCoarse(
            f"recurrence horizon {0.5 * t_rec:.4g} is too short for a fit window starting at {t_start:.4g}")

    g = -1j * np.sqrt(w0 / 2) * eta
    w = model.coupling.matrix * np.sqrt(step)
    det_modes = model.spectrum.frequencies - w0
    det_bins = grid - w0
    n = model.n_modes
    m = model.n_channels

    def apply_h(y):
        c = y[0]
        cm = y[1:1 + n]
        cb = y[1 + n:].reshape(m, n_bins)
        out = np.empty_like(y)
        out[0] = g @ cm
        out[1:1 + n] = det_modes * cm + g.conj() * c + w @ cb.sum(axis=1)
        out[1 + n:] = (det_bins[None, :] * cb + (w.conj().T @ cm)[:, None]).ravel()
        return out

    size = 1 + n + m * n_bins
    y = np.zeros(size, complex)
    y[0] = 1.0
    n_steps = int(n_samples)
    tau = t_end / n_steps
    propagate = ChebyshevPropagator(apply_h, size, tau)
    ts, amps = [], []
    for k in range(1, n_steps + 1):
        y = propagate(y)
        t_k = k * tau
        if t_k >= t_start:
            ts.append(t_k)
            amps.append(y[0])
            if abs(y[0]) ** 2 < POPULATION_FLOOR:
                break
    t, amp = np.array(ts), np.array(amps)
    diag = {"t_start": t_start, "t_end": float(t[-1]) if t.size else t_start, "n_bins": n_bins,
            "band": (lo, hi), "recurrence_time": t_rec, "chebyshev_order": propagate.order,
            "norm_drift": abs(np.linalg.norm(y) - 1.0)}
    pop = np.abs(amp) ** 2
    keep = pop > POPULATION_FLOOR
    if keep.sum() < 10:
        raise FitRejected("too few points above the population floor inside the fit window", diag)
    t, lp = t[keep], np.log(pop[keep])
    slope, intercept = np.polyfit(t, lp, 1)
    resid = lp - (slope * t + intercept)
    ss_tot = np.sum((lp - lp.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 0.0
    gamma = -slope
    phase = np.unwrap(np.angle(amp[keep]))
    diag.update(r2=r2, intercept=intercept, fit_points=int(keep.sum()),
                shift=float(-np.polyfit(t, phase, 1)[0]))
    if not r2 >= r2_min:
        raise FitRejected(f"decay is not exponential on the fit window (R^2 = {r2:.6f})",
                          dict(diag, gamma=gamma))
    return DecayResult(float(gamma), float(gamma / (np.pi * w0)), "oracle", diagnostics=diag)
