"""Chaotic-cavity ensembles: GOE mode spectra, resonance widths and decay-rate statistics.

GOE normalization: symmetric H with diagonal variance 1/(2N) and
off-diagonal variance 1/(4N), so the semicircle has unit radius. The
eigenvalues x are mapped to omega = center + half_width * x.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import stats

from .errors import OpenCavityError
from .spectrum import CavityModel, CouplingModel, ModeSpectrum

UNFOLD_DEGREE = 7


def sub_rng(seed, *index) -> np.random.Generator:
    """Independent generator for (seed, index...), stable under any scheduling."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in index)))


def goe_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(0.0, np.sqrt(1.0 / (2 * n)), size=(n, n))
    return 0.5 * (a + a.T)


def goe_frequencies(n: int, seed, center: float, half_width: float, index: int = 0) -> np.ndarray:
    """Sorted GOE eigenvalues mapped into [center - half_width, center + half_width].

    Eigenvalues that fluctuate past the semicircle edge are pulled back by
    rescaling the whole draw, so the band is never left.
    """
    x = np.linalg.eigvalsh(goe_matrix(n, sub_rng(seed, index)))
    x = x / max(1.0, np.max(np.abs(x)))
    return center + half_width * x


def semicircle_cdf(x):
    x = np.clip(x, -1.0, 1.0)
    return 0.5 + (x * np.sqrt(1 - x * x) + np.arcsin(x)) / np.pi


def wigner_surmise_pdf(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s * s)


def wigner_surmise_cdf(s):
    s = np.asarray(s, dtype=float)
    return 1.0 - np.exp(-0.25 * np.pi * s * s)


def porter_thomas_cdf(y):
    """CDF of a chi-squared variable with one degree of freedom scaled to unit mean."""
    return stats.chi2.cdf(y, df=1)


def unfold(levels, degree: int = UNFOLD_DEGREE) -> np.ndarray:
    """Map levels through a polynomial fit of the integrated density (staircase)."""
    e = np.sort(np.asarray(levels, dtype=float))
    staircase = np.arange(1, e.size + 1)
    mid, scale = 0.5 * (e[0] + e[-1]), 0.5 * (e[-1] - e[0]) or 1.0
    coef = np.polynomial.polynomial.polyfit((e - mid) / scale, staircase, degree)
    return np.polynomial.polynomial.polyval((e - mid) / scale, coef)


def unfolded_spacings(levels, keep: float = 0.8, degree: int = UNFOLD_DEGREE) -> np.ndarray:
    """Nearest-neighbour spacings of the unfolded central ``keep`` fraction of the spectrum."""
    u = unfold(levels, degree)
    n = u.size
    cut = int(round(0.5 * (1 - keep) * n))
    s = np.diff(u[cut:n - cut])
    return s / s.mean()


@dataclass(frozen=True)
class EnsembleConfig:
    n_modes: int
    n_channels: int
    coupling_strength: float
    n_samples: int
    seed: int
    band: tuple
    atom_model: str = "gaussian"
    eta_variance: float = 1e-4
    eta: Optional[tuple] = None

    def __post_init__(self):
        if self.n_samples < 1 or self.n_modes < 1 or self.n_channels < 1:
            raise ValueError("n_samples, n_modes and n_channels must all be >= 1")
        center, hw = self.band
        if hw <= 0 or center - hw <= 0:
            raise ValueError("ensemble band must be positive: center - half_width > 0")
        if self.coupling_strength < 0:
            raise ValueError("coupling_strength must be >= 0")
        if self.atom_model not in ("fixed", "gaussian"):
            raise ValueError("atom_model must be 'fixed' or 'gaussian'")
        if self.atom_model == "fixed" and self.eta is None:
            raise ValueError("fixed atom model needs eta")


def sample_model(config: EnsembleConfig, index: int) -> CavityModel:
    center, hw = config.band
    spectrum = ModeSpectrum(goe_frequencies(config.n_modes, config.seed, center, hw, index=index))
    shape = (config.n_modes, config.n_channels)
    if config.coupling_strength > 0:
        w = sub_rng(config.seed, index, 1).normal(0.0, config.coupling_strength, size=shape)
        coupling = CouplingModel("gaussian-random", w, seed=config.seed)
    else:
        coupling = CouplingModel("constant", np.zeros(shape))
    return CavityModel(spectrum, coupling)


def sample_eta(config: EnsembleConfig, index: int) -> np.ndarray:
    if config.atom_model == "fixed":
        return np.asarray(config.eta, dtype=complex)
    rng = sub_rng(config.seed, index, 2)
    return rng.normal(0.0, np.sqrt(config.eta_variance), size=config.n_modes).astype(complex)


def sample_ensemble(config: EnsembleConfig) -> Iterator[tuple]:
    """Yield (ModeSpectrum, CouplingModel) per sample, deterministic in (seed, index)."""
    for i in range(config.n_samples):
        m = sample_model(config, i)
        yield m.spectrum, m.coupling


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def spacing_statistics(config: EnsembleConfig, keep: float = 0.8, threads: int = 1) -> dict:
    """Pooled unfolded spacings and a KS test against the Wigner surmise."""
    spacings = np.concatenate(_map(
        lambda i: unfolded_spacings(sample_model(config, i).spectrum.frequencies, keep),
        range(config.n_samples), threads))
    ks = stats.kstest(spacings, wigner_surmise_cdf)
    return {"spacings": spacings, "n": int(spacings.size),
            "ks_statistic": float(ks.statistic), "ks_pvalue": float(ks.pvalue)}


def _histogram(values, bins):
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def width_statistics(config: EnsembleConfig, bins: int = 50, threads: int = 1) -> dict:
    """Pooled resonance widths, the per-sample trace sum rule and a Porter-Thomas KS test.

    The KS test compares widths scaled by the first-order mean width
    2 pi sigma_w^2 against chi-squared with one degree of freedom; it is
    only meaningful for a single weakly coupled channel.
    """
    from .resonances import find_poles

    def one(i):
        model = sample_model(config, i)
        poles = find_poles(model)
        widths = np.array([-2.0 * p.pole.imag for p in poles])
        w = model.coupling.matrix
        expected = 2 * np.pi * float(np.real(np.trace(w @ w.conj().T)))
        total = float(widths.sum())
        rel = abs(total - expected) / expected if expected > 0 else abs(total)
        return widths, rel

    out = _map(one, range(config.n_samples), threads)
    widths = np.concatenate([o[0] for o in out])
    sum_rule = np.array([o[1] for o in out])
    report = {
        "n_widths": int(widths.size),
        "mean": float(widths.mean()),
        "variance": float(widths.var(ddof=1)) if widths.size > 1 else 0.0,
        "stderr": float(widths.std(ddof=1) / np.sqrt(widths.size)) if widths.size > 1 else 0.0,
        "histogram": _histogram(widths, bins),
        "trace_rule_max_rel_error": float(sum_rule.max()),
        "trace_rule_rel_errors": sum_rule.tolist(),
        "widths": widths,
    }
    mean_width = 2 * np.pi * config.coupling_strength ** 2 * config.n_channels
    if mean_width > 0:
        ks = stats.kstest(widths / mean_width, porter_thomas_cdf)
        report.update(porter_thomas_ks=float(ks.statistic), porter_thomas_pvalue=float(ks.pvalue))
    return report


def decay_rate_distribution(config: EnsembleConfig, omega0: float, bins: int = 50,
                            threads: int = 1) -> dict:
    """Histogram and quantiles of the direct-method decay rate over the ensemble."""
    from .emission import AtomSpec, decay_rate_direct

    def one(i):
        try:
            atom = AtomSpec(omega0, sample_eta(config, i))
            return decay_rate_direct(sample_model(config, i), atom).gamma
        except OpenCavityError:
            return None

    raw = _map(one, range(config.n_samples), threads)
    gammas = np.array([g for g in raw if g is not None])
    skipped = sum(g is None for g in raw)
    report = {"n": int(gammas.size), "skipped": int(skipped), "gammas": gammas}
    if gammas.size:
        q = np.quantile(gammas, [0.05, 0.25, 0.5, 0.75, 0.95])
        report.update(
            mean=float(gammas.mean()),
            stderr=float(gammas.std(ddof=1) / np.sqrt(gammas.size)) if gammas.size > 1 else 0.0,
            quantiles=dict(zip(["q05", "q25", "q50", "q75", "q95"], map(float, q))),
            histogram=_histogram(gammas, bins),
        )
    return report


def golden_rule_mean_rate(config: EnsembleConfig, omega0: float) -> float:
    """pi omega0 <|eta_l|^2> rho(omega0) with rho the semicircle density of modes."""
    center, hw = config.band
    x = (omega0 - center) / hw
    density = config.n_modes * 2.0 / (np.pi * hw) * np.sqrt(max(0.0, 1 - x * x))
    return np.pi * omega0 * config.eta_variance * density


def config_echo(config: EnsembleConfig) -> dict:
    d = asdict(config)
    d["band"] = list(config.band)
    if config.eta is not None:
        d["eta"] = [complex(e).real for e in config.eta]
    return d
