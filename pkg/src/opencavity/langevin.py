"""Markovian Langevin dynamics of the internal cavity modes.

    da/dt = -i H_eff a + F(t),   H_eff = diag(w_l) - i pi Sigma

Only normal-ordered moments are tracked: vacuum input contributes no
noise to <a^+ a>. Thermal channel occupations n_m feed the second moments
through the source 2 pi W diag(n) W^+ (plus 2 pi K K^+ n_abs and
2 pi G G^+ (n_amp + 1) for media baths). That source is the usual
fluctuation-dissipation completion of the Langevin equations; the
rotating-wave model does not fix it by itself.

Covariance matrices are reported as cov[l, l'] = <a_l^+ a_l'>.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, linalg

from .errors import GrowthWarning, NoSteadyState, StepSizeError
from .resonances import effective_hamiltonian
from .rmt import sub_rng
from .spectrum import CavityModel

BATCH = 1000


@dataclass(frozen=True, eq=False)
class LangevinRun:
    times: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    n_traj: int
    seed: int
    mean_stderr: Optional[np.ndarray] = None
    covariance_stderr: Optional[np.ndarray] = None
    final_states: Optional[np.ndarray] = None


def _markov_h(model: CavityModel) -> np.ndarray:
    if not model.is_markov:
        raise ValueError("Langevin dynamics needs frequency-independent couplings")
    return effective_hamiltonian(model).h


def _check_growth(h):
    rate = float(np.max(linalg.eigvals(h).imag))
    if rate > 0:
        warnings.warn(f"model is above threshold: amplitudes grow at rate {rate:.6g}",
                      GrowthWarning, stacklevel=3)
    return rate


def mean_evolution(model: CavityModel, a0, times, method: str = "expm") -> np.ndarray:
    """<a>(t) = exp(-i H_eff t) a0 for every t in ``times``; returns shape (T, N).

    ``method="expm"`` uses scaling-and-squaring, ``method="eig"`` propagates
    in the eigenbasis of H_eff.
    """
    h = _markov_h(model)
    a0 = np.asarray(a0, dtype=complex)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted and nonnegative")
    _check_growth(h)
    if method == "expm":
        return np.array([linalg.expm(-1j * h * t) @ a0 for t in times])
    if method == "eig":
        vals, vecs = linalg.eig(h)
        coef = np.linalg.solve(vecs, a0)
        return (vecs @ (np.exp(-1j * np.outer(vals, times)) * coef[:, None])).T
    raise ValueError(f"unknown propagation method {method!r}")


def _occupations(model: CavityModel, n_in):
    n = np.broadcast_to(np.asarray(n_in, dtype=float), (model.n_channels,))
    if np.any(n < 0):
        raise ValueError("channel occupations must be >= 0")
    return n


def noise_source(model: CavityModel, n_in=0.0) -> np.ndarray:
    """Q with <dF dF^+> = Q dt, in the a a^+ ordering (Q[l, l'] = <dF_l dF_l'^*>/dt)."""
    w = model.coupling.matrix
    q = 2 * np.pi * (w * _occupations(model, n_in)) @ w.conj().T
    if model.media is not None:
        k, g = model.kappa, model.gamma
        q = q + 2 * np.pi * model.media.n_abs * (k @ k.conj().T)
        q = q + 2 * np.pi * (model.media.n_amp + 1.0) * (g @ g.conj().T)
    return q


def steady_state_covariance(model: CavityModel, n_in=0.0) -> np.ndarray:
    """Stationary <a_l^+ a_l'> from the Lyapunov equation H C - C H^+ = -i Q."""
    h = _markov_h(model)
    vals = linalg.eigvals(h)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(vals.imag) >= -1e-12 * scale:
        raise NoSteadyState(f"pole with Im = {np.max(vals.imag):.3e} is not damped")
    q = noise_source(model, n_in)
    c = linalg.solve_continuous_lyapunov(-1j * h, -q)
    c = 0.5 * (c + c.conj().T)
    resid = np.max(np.abs(h @ c - c @ h.conj().T + 1j * q))
    if resid > 1e-10 * max(1.0, np.max(np.abs(q))):
        raise NoSteadyState(f"Lyapunov residual {resid:.3e} too large")
    return c.T


def moment_evolution(model: CavityModel, n_in, times, cov0=None, rtol=1e-10, atol=1e-13):
    """Integrate the second-moment equations dC/dt = -i H C + i C H^+ + Q directly.

    Returns <a^+ a> at each time, shape (T, N, N). Independent of the
    Lyapunov solve and used to check it.
    """
    h = _markov_h(model)
    q = noise_source(model, n_in)
    n = model.n_modes
    c0 = np.zeros((n, n), complex) if cov0 is None else np.asarray(cov0, complex).T

    def rhs(_, y):
        c = y.reshape(n, n)
        return (-1j * (h @ c) + 1j * (c @ h.conj().T) + q).ravel()

    times = np.asarray(times, dtype=float)
    sol = integrate.solve_ivp(rhs, (0.0, times[-1]), c0.ravel(), method="DOP853",
                              t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return np.array([sol.y[:, i].reshape(n, n).T for i in range(times.size)])


def _noise_factor(q):
    """B with B B^+ = Q; eigen-factor so rank-deficient Q (fewer channels than modes) works."""
    vals, vecs = np.linalg.eigh(0.5 * (q + q.conj().T))
    vals = np.clip(vals, 0.0, None)
    keep = vals > 1e-14 * max(1.0, vals.max(initial=0.0))
    return vecs[:, keep] * np.sqrt(vals[keep])


def simulate_trajectories(model: CavityModel, n_in=0.0, dt: float = 1e-2, t_max: float = 10.0,
                          n_traj: int = 1000, seed: int = 0, a0=None, n_record: int = 200,
                          threads: int = 1) -> LangevinRun:
    """Euler-Maruyama c-number trajectories of the Langevin equations.

    Integration runs in a frame rotating at the mean mode frequency; the
    normal-ordered covariance is invariant under that global phase and the
    mean is rotated back on output. The stability guard applies to the
    rotating-frame generator: dt * ||H_eff - w_c|| < 0.1.

    Trajectories are processed in fixed batches of ``BATCH``; batch b draws
    its noise from the generator for (seed, b), so results do not depend on
    ``threads``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    h = _markov_h(model)
    n = model.n_modes
    wc = float(np.mean(np.real(np.diag(h))))
    hr = h - wc * np.eye(n)
    norm = float(np.linalg.norm(hr, 2))
    if dt * norm >= 0.1:
        raise StepSizeError(f"dt * ||H_eff|| = {dt * norm:.3g} violates the 0.1 stability guard")
    _check_growth(h)
    n_steps = int(round(t_max / dt))
    stride = max(1, n_steps // max(1, n_record))
    rec_steps = np.arange(0, n_steps + 1, stride)
    if rec_steps[-1] != n_steps:
        rec_steps = np.append(rec_steps, n_steps)
    b = _noise_factor(noise_source(model, n_in))
    r = b.shape[1]
    prop = (np.eye(n) - 1j * dt * hr).T
    bt = np.sqrt(dt) * b.T
    start = np.zeros(n, complex) if a0 is None else np.asarray(a0, complex)

    def run_batch(bi):
        size = min(BATCH, n_traj - bi * BATCH)
        rng = sub_rng(seed, bi)
        a = np.tile(start, (size, 1))
        sums = np.zeros((rec_steps.size, n), complex)
        cov = np.zeros((rec_steps.size, n, n), complex)
        k = 0
        for step in range(n_steps + 1):
            if step == rec_steps[k]:
                sums[k] = a.sum(axis=0)
                cov[k] = a.conj().T @ a
                k += 1
                if step == n_steps:
                    break
            a = a @ prop
            if r:
                xi = (rng.standard_normal((size, r)) + 1j * rng.standard_normal((size, r))) / np.sqrt(2)
                a = a + xi @ bt
        return sums, cov, a

    n_batches = -(-n_traj // BATCH)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_batch, range(n_batches)))
    else:
        parts = [run_batch(i) for i in range(n_batches)]
    sums = sum(p[0] for p in parts)
    cov = sum(p[1] for p in parts)
    final = np.concatenate([p[2] for p in parts])
    times = rec_steps * dt
    phase = np.exp(-1j * wc * times)[:, None]
    mean = sums / n_traj * phase
    covariance = cov / n_traj
    # per-element standard errors of the final mean and <a^+ a>
    ddof = 1 if n_traj > 1 else 0
    prod = final.conj()[:, :, None] * final[:, None, :]
    cov_se = (np.std(prod.real, axis=0, ddof=ddof) + 1j * np.std(prod.imag, axis=0, ddof=ddof)) / np.sqrt(n_traj)
    mean_se = np.std(final, axis=0, ddof=ddof) / np.sqrt(n_traj)
    final = final * np.exp(-1j * wc * times[-1])
    return LangevinRun(times, mean, covariance, n_traj, seed, mean_se, cov_se, final)
