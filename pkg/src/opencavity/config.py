"""Run configuration: schema, parsing (TOML or JSON) and validation.

Every section is a flat key/value table. Unknown sections or keys, and
values of the wrong type, raise :class:`ConfigError` carrying the line and
column of the offending entry when it can be located in the source text.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import tomli

from .errors import ConfigError

_MISSING = object()

# section -> key -> (type tag, default); _MISSING marks required keys
SCHEMA = {
    "spectrum": {
        "kind": ("str", "comb"),
        "n_modes": ("int", None),
        "omega_min": ("float", None),
        "spacing": ("float", None),
        "frequencies": ("floats", None),
        "center": ("float", None),
        "half_width": ("float", None),
        "index": ("int", 0),
    },
    "coupling": {
        "kind": ("str", "constant"),
        "n_channels": ("int", 1),
        "value": ("matrix", None),
        "sigma": ("float", None),
        "seed": ("int", None),
        "band": ("floats", None),
        "edge": ("float", None),
    },
    "media": {
        "kappa": ("matrix", None),
        "gamma": ("matrix", None),
        "n_absorbing": ("int", 1),
        "n_amplifying": ("int", 1),
        "n_abs": ("float", 0.0),
        "n_amp": ("float", 0.0),
    },
    "atom": {
        "omega0": ("float", _MISSING),
        "eta": ("floats", _MISSING),
        "eta_imag": ("floats", None),
        "oracle_bins": ("ints", [1000, 10000]),
        "oracle_margin": ("float", 20.0),
    },
    "sweep": {
        "omega_min": ("float", _MISSING),
        "omega_max": ("float", _MISSING),
        "n_points": ("int", 1000),
    },
    "langevin": {
        "n_in": ("floats", [0.0]),
        "dt": ("float", 1e-2),
        "t_max": ("float", 10.0),
        "n_traj": ("int", 1000),
        "n_record": ("int", 200),
        "a0": ("floats", None),
        "trajectories": ("bool", True),
    },
    "ensemble": {
        "n_modes": ("int", _MISSING),
        "n_channels": ("int", 1),
        "coupling_strength": ("float", _MISSING),
        "n_samples": ("int", 100),
        "center": ("float", 1.0),
        "half_width": ("float", 0.5),
        "atom_model": ("str", "gaussian"),
        "eta_variance": ("float", 1e-4),
        "eta": ("floats", None),
        "omega0": ("float", None),
        "bins": ("int", 50),
        "keep": ("float", 0.8),
    },
    "toy1d": {
        "length": ("float", 1.0),
        "barrier_strength": ("float", _MISSING),
        "eps_in": ("float", 1.0),
        "swap_boundary": ("bool", False),
        "n_modes": ("int", 20),
        "n_compare": ("int", 10),
        "delay_points": ("int", 4000),
    },
    "output": {
        "format": ("str", "csv"),
        "plots": ("bool", True),
    },
}
GLOBALS = {"seed": ("int", 0), "threads": ("int", 1)}

CHOICES = {
    ("spectrum", "kind"): ("comb", "explicit", "goe"),
    ("coupling", "kind"): ("constant", "gaussian-random", "band-limited"),
    ("ensemble", "atom_model"): ("gaussian", "fixed"),
    ("output", "format"): ("csv", "json"),
}


class _Locator:
    """Best-effort line/column lookup of ``[section] key`` in the raw text."""

    def __init__(self, text: str, is_json: bool):
        self.lines = text.splitlines()
        self.is_json = is_json

    def find(self, section, key=None):
        if self.is_json:
            return self._find_json(section, key)
        current = None
        for i, line in enumerate(self.lines, 1):
            head = re.match(r"\s*\[\s*([A-Za-z0-9_-]+)\s*\]", line)
            if head:
                current = head.group(1)
                if key is None and current == section:
                    return i, head.start(1) + 1
                continue
            if key is not None and current == section:
                m = re.match(r"\s*([A-Za-z0-9_-]+)\s*=", line)
                if m and m.group(1) == key:
                    return i, m.start(1) + 1
        return None, None

    def _find_json(self, section, key):
        after = section is None
        for i, line in enumerate(self.lines, 1):
            if not after and f'"{section}"' in line:
                after = True
                if key is None:
                    return i, line.index(f'"{section}"') + 1
            if after and key is not None and f'"{key}"' in line:
                return i, line.index(f'"{key}"') + 1
        return None, None


def _coerce(tag, value, where):
    def bad():
        return ConfigError(f"{where}: expected {tag}, got {type(value).__name__} {value!r}")

    if tag == "str":
        if not isinstance(value, str):
            raise bad()
        return value
    if tag == "bool":
        if not isinstance(value, bool):
            raise bad()
        return value
    if tag == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad()
        return value
    if tag == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad()
        return float(value)
    if tag in ("floats", "ints"):
        items = value if isinstance(value, list) else [value]
        want = int if tag == "ints" else (int, float)
        if any(isinstance(v, bool) or not isinstance(v, want) for v in items):
            raise bad()
        return [int(v) for v in items] if tag == "ints" else [float(v) for v in items]
    if tag == "matrix":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, list) and value and all(isinstance(r, list) for r in value):
            rows = [_coerce("floats", r, where) for r in value]
            if len({len(r) for r in rows}) != 1:
                raise ConfigError(f"{where}: matrix rows have different lengths")
            return rows
        raise bad()
    raise AssertionError(tag)


def parse_config(text: str, is_json: bool = False) -> dict:
    """Parse and validate config text; returns the fully resolved config.

    Sections absent from the input stay absent (callers check that the
    sections their subcommand needs are present); present sections get
    their defaults filled in.
    """
    loc = _Locator(text, is_json)
    try:
        raw = json.loads(text) if is_json else tomli.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    except tomli.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"\(at line (\d+), column (\d+)\)", msg)
        if m:
            msg = msg[:m.start()].strip()
            raise ConfigError(f"invalid TOML: {msg}", int(m.group(1)), int(m.group(2))) from None
        raise ConfigError(f"invalid TOML: {msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table of sections")

    out = {}
    for name, (tag, default) in GLOBALS.items():
        out[name] = _coerce(tag, raw[name], name) if name in raw else default
    for name, body in raw.items():
        if name in GLOBALS:
            continue
        if name not in SCHEMA:
            line, col = loc.find(name) if not is_json else loc.find(None, name)
            raise ConfigError(f"unknown section [{name}]", line, col)
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table", *loc.find(None, name))
        fields = SCHEMA[name]
        section = {}
        for key, value in body.items():
            if key not in fields:
                raise ConfigError(f"unknown key '{key}' in [{name}]", *loc.find(name, key))
            try:
                section[key] = _coerce(fields[key][0], value, f"[{name}] {key}")
            except ConfigError as exc:
                raise ConfigError(str(exc), *loc.find(name, key)) from None
            allowed = CHOICES.get((name, key))
            if allowed and section[key] not in allowed:
                raise ConfigError(f"[{name}] {key} must be one of {', '.join(allowed)}",
                                  *loc.find(name, key))
        for key, (_, default) in fields.items():
            if key not in section:
                if default is _MISSING:
                    raise ConfigError(f"[{name}] is missing required key '{key}'", *loc.find(name))
                section[key] = default
        out[name] = section
    return out


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, is_json=path.suffix.lower() == ".json")


def require(config: dict, command: str, *sections):
    for s in sections:
        if s not in config:
            raise ConfigError(f"subcommand '{command}' needs section [{s}] in the config")
