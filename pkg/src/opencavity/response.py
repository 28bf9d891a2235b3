"""Level shift, response matrix D(omega) and the cavity Green function D^-1.

    D(w) = (w - w_l) delta_ll' + Delta_ll'(w) + i pi Sigma_ll'(w)
    Delta(w) = PV int dw' Sigma(w') / (w' - w)

Frequency-independent couplings (and all media couplings) are treated in
the Markov convention: the frequency integral runs over the whole real
line, the symmetric principal value of a constant vanishes and Delta = 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg
from scipy.linalg import lapack

from .errors import QuadratureError, SingularResponse
from .spectrum import CavityModel

CONDITION_CEILING = 1e12


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    omega: float
    d: np.ndarray
    delta: np.ndarray
    sigma: np.ndarray


def principal_value_window(omega, band, edge, tol=1e-9):
    """PV integral of window(x)^2 / (x - omega) over the band.

    Singularity subtraction: for omega inside the band the integrand is
    replaced by [f(x) - f(omega)] / (x - omega), which is bounded, and the
    subtracted piece is added back analytically as
    f(omega) * ln((hi - omega) / (omega - lo)).
    """
    with warnings.catch_warnings():
        # an unmet tolerance is reported through QuadratureError instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _principal_value_window(omega, band, edge, tol)


def _principal_value_window(omega, band, edge, tol):
    from .spectrum import raised_cosine_window as win

    lo, hi = band
    omega = float(omega)

    def f(x):
        return win(x, band, edge) ** 2

    brk = [p for p in (lo + edge, hi - edge) if lo < p < hi]
    if lo < omega < hi:
        f0 = f(omega)

        def reg(x):
            dx = x - omega
            if dx == 0.0:
                return 0.0
            return (f(x) - f0) / dx

        pts = sorted(set(brk + [omega]))
        if edge == 0:
            value, err = 0.0, 0.0
        else:
            value, err = integrate.quad(reg, lo, hi, points=pts, limit=400, epsabs=0.1 * tol, epsrel=0.0)
        value += f0 * np.log((hi - omega) / (omega - lo))
    elif omega == lo or omega == hi:
        if f(omega) != 0.0:
            raise QuadratureError(f"principal value diverges at the hard band edge omega={omega}",
                                  error_estimate=float("inf"))
        value, err = integrate.quad(lambda x: f(x) / (x - omega), lo, hi, points=brk or None,
                                    limit=400, epsabs=0.1 * tol, epsrel=0.0)
    else:
        value, err = integrate.quad(lambda x: f(x) / (x - omega), lo, hi, points=brk or None,
                                    limit=400, epsabs=0.1 * tol, epsrel=0.0)
    if not err <= tol:
        raise QuadratureError(f"principal-value quadrature error {err:.3e} exceeds {tol:.1e}",
                              error_estimate=err)
    return value


def evaluate_level_shift(model: CavityModel, omega: float) -> np.ndarray:
    """Hermitian level-shift matrix Delta(omega) (real symmetric for real couplings)."""
    n = model.n_modes
    c = model.coupling
    if c.kind != "band-limited":
        return np.zeros((n, n))
    w0 = c.matrix
    base = w0 @ w0.conj().T
    shift = principal_value_window(omega, c.band, c.edge, tol=model.pv_tol) * base
    if np.allclose(base.imag, 0.0):
        return shift.real
    return shift


def evaluate_D(model: CavityModel, omega: float) -> ResponseMatrix:
    delta = evaluate_level_shift(model, omega)
    sigma = model.sigma(float(omega))
    d = np.diag(omega - model.spectrum.frequencies).astype(complex) + delta + 1j * np.pi * sigma
    return ResponseMatrix(float(omega), d, delta, sigma)


def _lu_with_condition(d):
    with warnings.catch_warnings():
        # exact singularity shows up as an infinite condition number below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(d, check_finite=False)
    anorm = np.linalg.norm(d, 1)
    if anorm == 0:
        return lu, piv, np.inf
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    return lu, piv, cond


def solve_response(d, rhs, omega=None, ceiling=CONDITION_CEILING):
    """Solve D X = rhs, raising SingularResponse above the condition ceiling."""
    d = np.asarray(d, dtype=complex)
    if np.any(np.all(d == 0, axis=1)):
        raise SingularResponse(f"D is exactly singular at omega={omega}", np.inf, omega)
    lu, piv, cond = _lu_with_condition(d)
    if not cond < ceiling:
        raise SingularResponse(f"D ill-conditioned at omega={omega} (cond ~ {cond:.3e})", cond, omega)
    return linalg.lu_solve((lu, piv), rhs, check_finite=False)


def green_function(model: CavityModel, omega: float, ceiling=CONDITION_CEILING) -> np.ndarray:
    """Cavity Green function G(omega) = D(omega)^-1."""
    d = evaluate_D(model, omega).d
    return solve_response(d, np.eye(model.n_modes, dtype=complex), omega, ceiling)
