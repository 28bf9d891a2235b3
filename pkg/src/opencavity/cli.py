"""Command-line front end.

    opencavity {smatrix,poles,langevin,emission,rmt,oracle1d} --config FILE [--out DIR]
               [--format csv|json] [--seed N] [--threads N] [--oracle]

Exit status: 0 on success, 1 when a computation fails, 2 on a config or
usage error. Each run writes its tables, an optional ``plot.json``
description and a ``run.json`` manifest into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import load_config, require
from .errors import ConfigError, OpenCavityError
from .spectrum import (CavityModel, MediaCouplings, build_coupling,
                       build_mode_spectrum)

COMMANDS = ("smatrix", "poles", "langevin", "emission", "rmt", "oracle1d")


# --- table output ---------------------------------------------------------------

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, ".17g")  # no negative zero
    return "" if v is None else str(v)


class Writer:
    """Collects artifacts in one directory and checksums them for the manifest."""

    def __init__(self, out: Path, fmt: str, plots: bool = True):
        self.out = out
        self.fmt = fmt
        self.plots = plots
        self.files = []
        out.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, columns, rows) -> str:
        if self.fmt == "json":
            name = f"{stem}.json"
            body = {"columns": list(columns),
                    "rows": [[_json_value(v) for v in r] for r in rows]}
            self.json(name, body)
            return name
        name = f"{stem}.csv"
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files.append(name)
        return name

    def json(self, name: str, data) -> str:
        with open(self.out / name, "w", newline="") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_json_value)
            fh.write("\n")
        self.files.append(name)
        return name

    def checksums(self) -> dict:
        return {f: hashlib.sha256((self.out / f).read_bytes()).hexdigest() for f in self.files}


def _json_value(v):
    if isinstance(v, np.ndarray):
        return [_json_value(x) for x in v.tolist()]
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    return v


def _plot(writer, data_file, x, ys, title, xlabel, ylabel, kind="line", log_y=False):
    if writer.fmt == "csv" and writer.plots:
        writer.json("plot.json", {"title": title, "kind": kind, "data": data_file, "x": x, "y": ys,
                                  "xlabel": xlabel, "ylabel": ylabel, "log_y": log_y})


# --- model assembly -------------------------------------------------------------

def _matrix(value, shape, name):
    if value is None:
        return None
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return np.full(shape, float(a))
    if a.shape != shape:
        raise ConfigError(f"{name} has shape {a.shape}, expected {shape}")
    return a


def build_model(cfg) -> CavityModel:
    sp, cp = cfg["spectrum"], cfg["coupling"]
    kind = sp["kind"]
    params = {k: v for k, v in sp.items() if k != "kind" and v is not None}
    if kind == "goe":
        params.setdefault("seed", cfg["seed"])
    try:
        spectrum = build_mode_spectrum(kind, **params)
    except KeyError as exc:
        raise ConfigError(f"[spectrum] kind '{kind}' needs key {exc.args[0]!r}") from None
    if sp["n_modes"] is not None and len(spectrum) != sp["n_modes"]:
        raise ConfigError(f"[spectrum] n_modes = {sp['n_modes']} but {len(spectrum)} frequencies were given")
    n, m = len(spectrum), cp["n_channels"]
    cparams = {k: v for k, v in cp.items() if k not in ("kind", "n_channels") and v is not None}
    coupling = build_coupling(cp["kind"], n, m, **cparams)
    media = None
    if "media" in cfg:
        md = cfg["media"]
        kappa = _matrix(md["kappa"], (n, md["n_absorbing"]), "[media] kappa")
        gamma = _matrix(md["gamma"], (n, md["n_amplifying"]), "[media] gamma")
        media = MediaCouplings(kappa, gamma, md["n_abs"], md["n_amp"])
    return CavityModel(spectrum, coupling, media)


def _atom(cfg, n_modes):
    from .emission import AtomSpec

    at = cfg["atom"]
    eta = np.asarray(at["eta"], dtype=complex)
    if at["eta_imag"] is not None:
        eta = eta + 1j * np.asarray(at["eta_imag"], dtype=float)
    if eta.size == 1 and n_modes > 1:
        eta = np.full(n_modes, eta[0])
    if eta.size != n_modes:
        raise ConfigError(f"[atom] eta has {eta.size} entries for {n_modes} modes")
    return AtomSpec(at["omega0"], eta)


def _complex_columns(prefix, shape):
    cols = []
    for i in range(shape[0]):
        for j in range(shape[1]):
            cols += [f"{prefix}_{i}_{j}_re", f"{prefix}_{i}_{j}_im"]
    return cols


def _flat(a):
    out = []
    for v in np.asarray(a).ravel():
        out += [float(v.real), float(v.imag)]
    return out


# --- subcommands ----------------------------------------------------------------

def cmd_smatrix(cfg, args, writer):
    from .scattering import sweep

    require(cfg, "smatrix", "spectrum", "coupling", "sweep")
    model = build_model(cfg)
    sw = cfg["sweep"]
    if not 0 < sw["omega_min"] < sw["omega_max"] or sw["n_points"] < 1:
        raise ConfigError("[sweep] needs 0 < omega_min < omega_max and n_points >= 1")
    grid = np.linspace(sw["omega_min"], sw["omega_max"], sw["n_points"])
    points = sweep(model, grid, threads=cfg["threads"])
    m = model.n_channels
    cols = ["omega"] + _complex_columns("S", (m, m)) + ["unitarity_defect", "flux_defect", "error"]
    rows = []
    for p in points:
        if p.ok:
            r = p.result
            rows.append([p.omega] + _flat(r.s) + [r.unitarity_defect, r.flux_defect, ""])
        else:
            rows.append([p.omega] + [math.nan] * (2 * m * m + 2) + [str(p.error)])
    name = writer.table("sweep", cols, rows)
    _plot(writer, name, "omega", ["S_0_0_re", "S_0_0_im"], "Scattering matrix", "omega", "S")
    failed = sum(not p.ok for p in points)
    return {"points": len(points), "failed_points": failed}


def cmd_poles(cfg, args, writer):
    from .resonances import biorthogonality_defect, find_poles

    require(cfg, "poles", "spectrum", "coupling")
    model = build_model(cfg)
    method = "markov" if model.is_markov else "newton-refine"
    poles = find_poles(model, method=method)
    cols = ["index", "frequency", "width", "pole_re", "pole_im", "residue_norm", "degenerate"]
    rows = [[i, p.frequency, p.width, p.pole.real, p.pole.imag, p.residue_norm, p.degenerate]
            for i, p in enumerate(poles)]
    name = writer.table("poles", cols, rows)
    _plot(writer, name, "frequency", ["width"], "Resonance poles", "frequency", "width", kind="scatter")
    return {"method": method, "n_poles": len(poles), "biorthogonality_defect": biorthogonality_defect(poles)}


def cmd_langevin(cfg, args, writer):
    from .langevin import simulate_trajectories, steady_state_covariance

    require(cfg, "langevin", "spectrum", "coupling", "langevin")
    model = build_model(cfg)
    lg = cfg["langevin"]
    n_in = lg["n_in"][0] if len(lg["n_in"]) == 1 else np.asarray(lg["n_in"])
    n = model.n_modes
    summary = {}
    try:
        cov = steady_state_covariance(model, n_in)
        rows = [[i, j, cov[i, j].real, cov[i, j].imag] for i in range(n) for j in range(n)]
        writer.table("steady_covariance", ["l", "lp", "re", "im"], rows)
        summary["steady_occupations"] = np.real(np.diag(cov)).tolist()
    except OpenCavityError as exc:
        if not lg["trajectories"]:
            raise
        summary["steady_state"] = str(exc)
    if lg["trajectories"]:
        run = simulate_trajectories(model, n_in, dt=lg["dt"], t_max=lg["t_max"], n_traj=lg["n_traj"],
                                    seed=cfg["seed"], a0=lg["a0"], n_record=lg["n_record"],
                                    threads=cfg["threads"])
        cols = ["t"] + [f"mean_{l}_{p}" for l in range(n) for p in ("re", "im")] + [f"occupation_{l}" for l in range(n)]
        rows = [[t] + _flat(run.mean[k]) + np.real(np.diag(run.covariance[k])).tolist()
                for k, t in enumerate(run.times)]
        name = writer.table("trajectories", cols, rows)
        _plot(writer, name, "t", [f"occupation_{l}" for l in range(n)], "Mode occupations", "t", "<a^+ a>")
        summary["n_traj"] = run.n_traj
    return summary


def cmd_emission(cfg, args, writer):
    from .emission import (decay_rate_direct, decay_rate_modes, decay_rate_nonrwa,
                           wigner_weisskopf_oracle)

    require(cfg, "emission", "spectrum", "coupling", "atom")
    model = build_model(cfg)
    atom = _atom(cfg, model.n_modes)
    results = [decay_rate_direct(model, atom)]
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        results += [decay_rate_modes(model, atom), decay_rate_nonrwa(model, atom)]
    labels = ["direct", "modes", "nonrwa"]
    rows = [[lab, r.method, r.gamma, r.ldos, r.shift] for lab, r in zip(labels, results)]
    writer.table("emission", ["estimator", "method_used", "gamma", "ldos", "shift"], rows)
    summary = {"gamma_direct": results[0].gamma}
    if args.oracle:
        direct = results[0].gamma
        orows = []
        for nb in cfg["atom"]["oracle_bins"]:
            t0 = time.perf_counter()
            try:
                r = wigner_weisskopf_oracle(model, atom, n_bins=nb, margin=cfg["atom"]["oracle_margin"])
                err = abs(r.gamma - direct) / abs(direct) if direct else math.nan
                orows.append([nb, r.gamma, direct, err, r.diagnostics["r2"], r.diagnostics["t_start"],
                              r.diagnostics["t_end"], time.perf_counter() - t0, ""])
            except OpenCavityError as exc:
                orows.append([nb, math.nan, direct, math.nan, math.nan, math.nan, math.nan,
                              time.perf_counter() - t0, str(exc)])
        name = writer.table("oracle", ["n_bins", "gamma_oracle", "gamma_direct", "rel_error", "r2",
                                       "t_start", "t_end", "seconds", "error"], orows)
        _plot(writer, name, "n_bins", ["rel_error"], "Oracle convergence", "bath bins",
              "relative error", kind="scatter", log_y=True)
        summary["oracle_rows"] = len(orows)
    return summary


def cmd_rmt(cfg, args, writer):
    from .rmt import (EnsembleConfig, config_echo, decay_rate_distribution,
                      golden_rule_mean_rate, spacing_statistics, width_statistics)

    require(cfg, "rmt", "ensemble")
    en = cfg["ensemble"]
    ec = EnsembleConfig(en["n_modes"], en["n_channels"], en["coupling_strength"], en["n_samples"],
                        cfg["seed"], (en["center"], en["half_width"]), en["atom_model"],
                        en["eta_variance"], None if en["eta"] is None else tuple(en["eta"]))
    threads = cfg["threads"]
    spacing = spacing_statistics(ec, keep=en["keep"], threads=threads)
    widths = width_statistics(ec, bins=en["bins"], threads=threads)
    report = {
        "config": config_echo(ec),
        "spacings": {k: v for k, v in spacing.items() if k != "spacings"},
        "widths": {k: v for k, v in widths.items() if k not in ("widths", "trace_rule_rel_errors")},
    }
    counts, edges = np.histogram(spacing["spacings"], bins=en["bins"])
    report["spacings"]["histogram"] = {"counts": counts.tolist(), "edges": edges.tolist()}
    omega0 = en["omega0"] if en["omega0"] is not None else en["center"]
    dist = decay_rate_distribution(ec, omega0, bins=en["bins"], threads=threads)
    report["decay_rates"] = {k: v for k, v in dist.items() if k != "gammas"}
    report["decay_rates"]["omega0"] = omega0
    report["decay_rates"]["golden_rule_mean"] = golden_rule_mean_rate(ec, omega0)
    writer.json("ensemble.json", report)
    writer.table("widths", ["width"], [[w] for w in widths["widths"]])
    return {"n_samples": ec.n_samples, "ks_spacing": spacing["ks_statistic"],
            "trace_rule_max_rel_error": widths["trace_rule_max_rel_error"]}


def cmd_oracle1d(cfg, args, writer):
    from .toy1d import (Geometry1D, ResonanceComparison, compare_resonances,
                        reflection_phase, wigner_delay)

    require(cfg, "oracle1d", "toy1d")
    t = cfg["toy1d"]
    geom = Geometry1D(t["length"], t["barrier_strength"], t["eps_in"], t["swap_boundary"])
    comp = compare_resonances(geom, t["n_modes"], t["n_compare"])
    cols = ResonanceComparison.COLUMNS
    name = writer.table("resonances", cols, [[r[c] for c in cols] for r in comp.rows])
    if args.oracle:
        hi = (t["n_compare"] + 0.5) * geom.free_spectral_range
        w = np.linspace(hi / t["delay_points"], hi, t["delay_points"])
        name = writer.table("delay", ["omega", "phase", "delay"],
                            np.column_stack([w, reflection_phase(geom, w), wigner_delay(geom, w)]).tolist())
        _plot(writer, name, "omega", ["delay"], "Wigner delay", "omega", "d arg S / d omega")
    return {"max_position_error_fsr": comp.max_position_error, "max_width_error": comp.max_width_error,
            "fit_failures": comp.failures}


HANDLERS = {"smatrix": cmd_smatrix, "poles": cmd_poles, "langevin": cmd_langevin,
            "emission": cmd_emission, "rmt": cmd_rmt, "oracle1d": cmd_oracle1d}


def make_parser():
    p = argparse.ArgumentParser(prog="opencavity", description="Open-cavity input-output calculations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML (or .json) run configuration")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--format", choices=("csv", "json"), help="table format (overrides [output] format)")
    p.add_argument("--seed", type=int, help="global seed (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    p.add_argument("--oracle", action="store_true", help="also run the brute-force oracle (emission, oracle1d)")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.oracle and args.command not in ("emission", "oracle1d"):
            raise ConfigError("--oracle applies only to the emission and oracle1d subcommands")
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg["seed"] = args.seed
        if args.threads is not None:
            cfg["threads"] = args.threads
        if cfg["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        # resolve inherited seeds so the echoed config reproduces the run
        if "coupling" in cfg and cfg["coupling"]["kind"] != "constant" and cfg["coupling"]["seed"] is None:
            cfg["coupling"]["seed"] = cfg["seed"]
        output = cfg.get("output", {"format": "csv", "plots": True})
        if args.format:
            output = dict(output, format=args.format)
        cfg["output"] = output
    except ConfigError as exc:
        print(f"opencavity: config error: {exc}", file=sys.stderr)
        return 2

    writer = Writer(Path(args.out), output["format"], output["plots"])
    try:
        summary = HANDLERS[args.command](cfg, args, writer)
    except ConfigError as exc:
        print(f"opencavity: config error: {exc}", file=sys.stderr)
        return 2
    except (OpenCavityError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"opencavity: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    manifest = {
        "command": args.command,
        "config": cfg,
        "seed": cfg["seed"],
        "threads": cfg["threads"],
        "oracle": args.oracle,
        "summary": summary,
        "versions": {"opencavity": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - t0,
        "files": writer.checksums(),
    }
    with open(writer.out / "run.json", "w", newline="") as fh:
        json.dump(_json_value(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
