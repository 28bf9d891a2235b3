"""Non-Hermitian effective Hamiltonian and resonance poles.

Poles are the complex zeros of det D(omega). In the Markov case
D(omega) = omega - H_eff with H_eff = diag(w_l) - Delta - i pi Sigma, so the
poles are the eigenvalues of H_eff and its left/right eigenvectors are the
biorthogonal resonance modes. Frequency-dependent couplings start from
those eigenvalues and refine each one by Newton iteration on the
smallest-magnitude eigenvalue of D(z).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DegeneratePoleWarning, PoleRefinementError
from .response import evaluate_level_shift
from .spectrum import CavityModel

CLUSTER_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    h: np.ndarray
    omega_ref: float


@dataclass(frozen=True, eq=False)
class ResonancePole:
    """Complex pole omega_k - i Gamma_k / 2 with R_k of unit norm and L_k^+ R_k = 1."""

    pole: complex
    left: np.ndarray
    right: np.ndarray
    residue_norm: float
    degenerate: bool = field(default=False)

    @property
    def frequency(self) -> float:
        return self.pole.real

    @property
    def width(self) -> float:
        return -2.0 * self.pole.imag


def effective_hamiltonian(model: CavityModel, omega_ref: float = None) -> EffectiveHamiltonian:
    """H_eff = diag(w_l) - Delta(omega_ref) - i pi Sigma(omega_ref).

    For Markov couplings the result does not depend on ``omega_ref``; it
    defaults to the mean mode frequency.
    """
    if omega_ref is None:
        omega_ref = float(np.mean(model.spectrum.frequencies))
    delta = evaluate_level_shift(model, omega_ref)
    h = np.diag(model.spectrum.frequencies).astype(complex) - delta - 1j * np.pi * model.sigma(float(omega_ref))
    return EffectiveHamiltonian(h, float(omega_ref))


def _clusters(values, tol):
    order = np.argsort(values.real)
    groups, used = [], np.zeros(values.size, bool)
    for i in order:
        if used[i]:
            continue
        near = np.flatnonzero((np.abs(values - values[i]) < tol) & ~used)
        used[near] = True
        groups.append(near)
    return groups


def biorthonormalize(vals, left, right, tol=CLUSTER_TOL):
    """Scale R to unit norm and L so that L^+ R = 1.

    Within a cluster of (near-)degenerate eigenvalues the left vectors are
    mixed so that the cluster block of L^+ R becomes the identity. Also
    returns |L^+ R| before scaling and a flag per pole marking clusters.
    """
    right = right / np.linalg.norm(right, axis=0)
    left = left / np.linalg.norm(left, axis=0)
    residue = np.abs(np.einsum("ij,ij->j", left.conj(), right))
    degenerate = np.zeros(vals.size, bool)
    for idx in _clusters(vals, tol):
        block = left[:, idx].conj().T @ right[:, idx]
        if idx.size > 1:
            degenerate[idx] = True
            # make the whole block the identity: L_c <- L_c block^{-+}
            try:
                left[:, idx] = left[:, idx] @ np.linalg.inv(block).conj().T
            except np.linalg.LinAlgError:
                pass
            warnings.warn(
                f"{idx.size} poles within {tol:g} of {vals[idx[0]]:.10g}; "
                "left/right vectors re-orthonormalized inside the cluster",
                DegeneratePoleWarning, stacklevel=3)
        else:
            left[:, idx] = left[:, idx] / np.conj(block)
    return left, right, residue, degenerate


def _markov_poles(h):
    vals, left, right = linalg.eig(h, left=True, right=True)
    left, right, residue, degenerate = biorthonormalize(vals, left, right)
    order = np.lexsort((vals.imag, vals.real))
    return [ResonancePole(complex(vals[k]), left[:, k].copy(), right[:, k].copy(),
                          float(residue[k]), bool(degenerate[k])) for k in order]


def _d_matrix(model: CavityModel, z, with_shift: bool):
    h0 = np.diag(model.spectrum.frequencies).astype(complex)
    n = model.n_modes
    d = z * np.eye(n) - h0 + 1j * np.pi * model.sigma(complex(z))
    if with_shift:
        d = d + evaluate_level_shift(model, float(np.real(z)))
    return d


def _d_prime(model: CavityModel, z, with_shift: bool):
    n = model.n_modes
    dp = np.eye(n, dtype=complex) + 1j * np.pi * model.sigma_derivative(complex(z))
    if with_shift:
        h = 1e-6 * max(1.0, abs(z))
        x = float(np.real(z))
        dp = dp + (evaluate_level_shift(model, x + h) - evaluate_level_shift(model, x - h)) / (2 * h)
    return dp


def refine_pole(model: CavityModel, z0: complex, tol: float = 1e-12, max_iter: int = 60):
    """Newton iteration on mu(z) = 0, mu the smallest-|.| eigenvalue of D(z).

    mu'(z) = l^+ D'(z) r / l^+ r by first-order perturbation theory. The
    level shift of band-limited couplings is taken at Re z.
    """
    with_shift = model.coupling.kind == "band-limited"
    z = complex(z0)
    for _ in range(max_iter):
        d = _d_matrix(model, z, with_shift)
        vals, left, right = linalg.eig(d, left=True, right=True)
        k = int(np.argmin(np.abs(vals)))
        l, r = left[:, k], right[:, k]
        dmu = (l.conj() @ _d_prime(model, z, with_shift) @ r) / (l.conj() @ r)
        step = vals[k] / dmu
        z = z - step
        if abs(step) < tol * max(1.0, abs(z)):
            d = _d_matrix(model, z, with_shift)
            vals, left, right = linalg.eig(d, left=True, right=True)
            k = int(np.argmin(np.abs(vals)))
            return z, left[:, k], right[:, k]
    raise PoleRefinementError(f"Newton refinement from {z0} did not converge", last_iterate=z)


def find_poles(model: CavityModel, method: str = "markov", omega_ref: float = None,
               tol: float = 1e-12, max_iter: int = 60) -> list:
    """Resonance poles sorted by real part.

    ``method="markov"`` diagonalizes H_eff (exact for frequency-independent
    couplings). ``method="newton-refine"`` seeds from H_eff evaluated at
    each mode frequency and refines on det D(z) = 0.
    """
    if method == "markov":
        if not model.is_markov and omega_ref is None:
            omega_ref = float(np.mean(model.spectrum.frequencies))
        return _markov_poles(effective_hamiltonian(model, omega_ref).h)
    if method != "newton-refine":
        raise ValueError(f"unknown pole method {method!r}")

    freqs = model.spectrum.frequencies
    seeds = []
    for wl in freqs:
        vals = linalg.eigvals(effective_hamiltonian(model, wl).h)
        seeds.append(vals[np.argmin(np.abs(vals.real - wl))])
    zs, lefts, rights = [], [], []
    for z0 in seeds:
        z, l, r = refine_pole(model, z0, tol, max_iter)
        zs.append(z)
        lefts.append(l)
        rights.append(r)
    vals = np.array(zs)
    left, right, residue, degenerate = biorthonormalize(vals, np.array(lefts).T, np.array(rights).T)
    order = np.lexsort((vals.imag, vals.real))
    return [ResonancePole(complex(vals[k]), left[:, k].copy(), right[:, k].copy(),
                          float(residue[k]), bool(degenerate[k])) for k in order]


def biorthogonality_defect(poles) -> float:
    """max_{j != k} |L_j^+ R_k| and max_k |L_k^+ R_k - 1| over a pole list."""
    left = np.array([p.left for p in poles]).T
    right = np.array([p.right for p in poles]).T
    g = left.conj().T @ right
    return float(np.max(np.abs(g - np.eye(len(poles)))))


def threshold_indicator(poles) -> float:
    """Largest imaginary part over all poles; negative means below threshold."""
    return float(max(p.pole.imag for p in poles))
