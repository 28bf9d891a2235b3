"""Input-output scattering: S(omega), the noise transfer matrices U, V and their flux identity.

    S = 1 - 2 pi i W^+ D^-1 W
    U = -2 pi i W^+ D^-1 K,   V = -2 pi i W^+ D^-1 G
    U U^+ - V V^+ = 1 - S S^+
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import OpenCavityError, SingularResponse
from .response import evaluate_D, solve_response
from .spectrum import CavityModel


@dataclass(frozen=True, eq=False)
class ScatteringResult:
    omega: float
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    unitarity_defect: float
    flux_defect: float


@dataclass(frozen=True)
class SweepPoint:
    """One sweep entry: either a result or the error that prevented it."""

    omega: float
    result: Optional[ScatteringResult] = None
    error: Optional[OpenCavityError] = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def _check_threshold(model: CavityModel, omega: float):
    """Amplifying models are only evaluated below threshold (all poles damped)."""
    if model.media is None or model.media.n_amplifying == 0:
        return
    from .resonances import effective_hamiltonian

    top = float(np.max(np.linalg.eigvals(effective_hamiltonian(model, float(omega)).h).imag))
    if top >= 0:
        raise SingularResponse(f"model is at or above threshold (max Im pole = {top:.3e})", np.inf, omega)


def s_matrix(model: CavityModel, omega: float) -> np.ndarray:
    _check_threshold(model, omega)
    w = model.coupling(float(omega))
    x = solve_response(evaluate_D(model, omega).d, w, omega)
    return np.eye(model.n_channels) - 2j * np.pi * (w.conj().T @ x)


def io_transform(model: CavityModel, omega: float) -> ScatteringResult:
    _check_threshold(model, omega)
    w = model.coupling(float(omega))
    k, g = model.kappa, model.gamma
    m, nl = w.shape[1], k.shape[1]
    x = solve_response(evaluate_D(model, omega).d, np.hstack([w, k, g]), omega)
    t = -2j * np.pi * (w.conj().T @ x)
    s = np.eye(m) + t[:, :m]
    u = t[:, m:m + nl]
    v = t[:, m + nl:]
    eye = np.eye(m)
    sst = s @ s.conj().T
    unit = float(np.max(np.abs(sst - eye)))
    flux = float(np.max(np.abs(u @ u.conj().T - v @ v.conj().T - (eye - sst))))
    return ScatteringResult(float(omega), s, u, v, unit, flux)


def sweep(model: CavityModel, grid: Sequence[float], threads: int = 1) -> list:
    """Evaluate :func:`io_transform` on every grid point.

    Failures are recorded per point (``SweepPoint.error``) and do not stop
    the sweep. Output order follows the grid regardless of ``threads``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("sweep grid is empty")
    if np.any(np.diff(grid) < 0):
        raise ValueError("sweep grid must be sorted")

    def point(om):
        try:
            return SweepPoint(float(om), io_transform(model, om))
        except OpenCavityError as exc:
            return SweepPoint(float(om), error=exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(point, grid))
    return [point(om) for om in grid]


def phase_winding(s_values) -> float:
    """Total unwrapped change of arg(det S) along a sequence of S matrices."""
    dets = np.array([np.linalg.det(np.atleast_2d(s)) for s in s_values])
    phase = np.unwrap(np.angle(dets))
    return float(phase[-1] - phase[0])
