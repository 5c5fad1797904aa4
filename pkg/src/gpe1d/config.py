"""Run configuration files.

The format is a flat, sectioned key-value text file::

    # comment
    [grid]
    n_points = 1024
    length = 1.0        ; trailing comments are allowed

Sections are ``grid``, ``physics``, ``initial``, ``integration``,
``output`` and (for the dispersion driver) ``dispersion``.  Unknown sections
and keys are errors, as are duplicated keys.  Every default applied is
recorded in :attr:`RunConfig.defaults_used`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import LambdaSchedule, auto_dt
from .errors import ConfigError
from .grid import Grid1D
from .model import DynamicsKind

__all__ = ["RunConfig", "parse_config", "parse_config_text", "SCHEMA"]

_REQUIRED = object()

# section -> key -> (type, default)
SCHEMA = {
    "grid": {
        "n_points": ("int", _REQUIRED),
        "length": ("float", 1.0),
    },
    "physics": {
        "coupling": ("float", _REQUIRED),
        "lambda": ("float", None),
        "stage_lambdas": ("floats", None),
        "mu": ("float", 0.0),
        "potential": ("str", "none"),
        "dynamics": ("str", "metriplectic"),
    },
    "initial": {
        "kind": ("str", "uniform"),
        "mode": ("int", 0),
        "positions": ("floats", None),
        "speed_fractions": ("floats", None),
        "match_phase": ("bool", False),
        "temperature": ("float", None),
        "mode_cutoff": ("int", None),
        "condensate_fraction": ("float", 0.1),
        "seed": ("int", 0),
        "seeds": ("ints", None),
        "noise": ("float", 0.0),
        "path": ("str", None),
    },
    "integration": {
        "dt": ("dt", "auto"),
        "t_end": ("float", None),
        "stage_durations": ("floats", None),
        "snapshot_stride": ("int", 1000),
        "observable_stride": ("int", 100),
        "renormalize": ("bool", False),
        "tol": ("float", 1e-9),
        "max_iters": ("int", 200000),
    },
    "output": {
        "directory": ("str", None),
        "heatmap": ("onoff", True),
        "formats": ("strs", ["csv", "gpf"]),
    },
    "dispersion": {
        "modes": ("ints", [1, 2, 3, 4]),
        "amplitude": ("float", 1e-4),
        "t_end": ("float", None),
        "samples": ("int", 400),
        "fit_tolerance": ("float", 1e-3),
    },
}

_INITIAL_KINDS = ("uniform", "plane_wave", "solitons", "thermal", "file")
_FORMATS = ("csv", "gpf")


@dataclass
class RunConfig:
    grid: Grid1D
    coupling: float
    mu: float
    potential: np.ndarray | None
    potential_source: str
    dynamics: DynamicsKind
    schedule: LambdaSchedule | None
    initial: dict
    dt: float
    dt_auto: bool
    snapshot_stride: int
    observable_stride: int
    renormalize: bool
    tol: float
    max_iters: int
    output_directory: Path | None
    heatmap: bool
    formats: list
    dispersion: dict
    source: str = "<string>"
    raw: dict = field(default_factory=dict)
    defaults_used: list = field(default_factory=list)
    lambda_value: float = 0.0

    @property
    def lam(self) -> float:
        """Dissipation of the first stage, or ``physics.lambda`` without a schedule."""
        return self.schedule.stages[0][1] if self.schedule else self.lambda_value

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "grid": {"n_points": self.grid.n_points, "length": self.grid.length},
            "physics": {
                "coupling": self.coupling,
                "mu": self.mu,
                "potential": self.potential_source,
                "dynamics": self.dynamics.value,
                "lambda": self.lam,
                "stages": [list(s) for s in self.schedule.stages] if self.schedule else None,
            },
            "initial": {k: v for k, v in self.initial.items()},
            "integration": {
                "dt": self.dt,
                "dt_auto": self.dt_auto,
                "snapshot_stride": self.snapshot_stride,
                "observable_stride": self.observable_stride,
                "renormalize": self.renormalize,
                "tol": self.tol,
                "max_iters": self.max_iters,
            },
            "output": {
                "directory": str(self.output_directory) if self.output_directory else None,
                "heatmap": self.heatmap,
                "formats": list(self.formats),
            },
            "dispersion": dict(self.dispersion),
            "defaults_used": list(self.defaults_used),
        }


_LINE_SECTION = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
_LINE_KEY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _strip_comment(line: str) -> str:
    for marker in ("#", ";"):
        pos = line.find(marker)
        if pos >= 0:
            line = line[:pos]
    return line.strip()


def _convert(kind: str, text: str, line: int, key: str):
    try:
        if kind == "int":
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "dt":
            return "auto" if text.lower() == "auto" else _convert("float", text, line, key)
        if kind == "str":
            if not text:
                raise ValueError
            return text
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if kind == "onoff":
            return _convert("bool", text, line, key)
        if kind in ("floats", "ints", "strs"):
            parts = [s.strip() for s in text.split(",") if s.strip()]
            if not parts:
                raise ValueError
            sub = {"floats": "float", "ints": "int", "strs": "str"}[kind]
            return [_convert(sub, s, line, key) for s in parts]
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as {kind}", line=line, key=key) from None
    raise AssertionError(kind)


def _tokenize(text: str):
    """``{section: {key: (raw_value, line)}}`` plus section line numbers."""
    sections: dict = {}
    section_lines: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _LINE_SECTION.match(line)
        if m:
            current = m.group(1).lower()
            if current not in SCHEMA:
                raise ConfigError(f"unknown section [{current}]", line=lineno)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", line=lineno)
            sections[current] = {}
            section_lines[current] = lineno
            continue
        m = _LINE_KEY.match(line)
        if not m:
            raise ConfigError(f"expected 'key = value' or '[section]', got {raw.strip()!r}",
                              line=lineno)
        if current is None:
            raise ConfigError("key outside of any section", line=lineno, key=m.group(1))
        key = m.group(1).lower()
        if key not in SCHEMA[current]:
            raise ConfigError(f"unknown key in [{current}]", line=lineno, key=key)
        if key in sections[current]:
            raise ConfigError(f"duplicate key in [{current}]", line=lineno, key=key)
        sections[current][key] = (m.group(2).strip(), lineno)
    return sections, section_lines


def parse_config_text(text: str, source: str = "<string>", base_dir: Path | None = None) -> RunConfig:
    sections, section_lines = _tokenize(text)
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    values: dict = {}
    lines: dict = {}
    defaults = []
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        given = sections.get(sec, {})
        for key, (kind, default) in keys.items():
            if key in given:
                raw, lineno = given[key]
                values[sec][key] = _convert(kind, raw, lineno, key)
                lines[(sec, key)] = lineno
            elif default is _REQUIRED:
                if sec not in sections:
                    raise ConfigError(f"missing section [{sec}] (needs '{key}')", key=key)
                raise ConfigError(f"missing required key in [{sec}]",
                                  line=section_lines.get(sec), key=key)
            else:
                values[sec][key] = default
                if default is not None:
                    defaults.append(f"{sec}.{key}={default}")

    def err(sec, key, msg):
        return ConfigError(msg, line=lines.get((sec, key), section_lines.get(sec)), key=key)

    g = values["grid"]
    try:
        grid = Grid1D(g["n_points"], g["length"])
    except ValueError as exc:
        raise err("grid", "n_points", str(exc)) from None

    ph = values["physics"]
    if ph["coupling"] < 0:
        raise err("physics", "coupling", "coupling must be >= 0")
    try:
        dynamics = DynamicsKind.parse(ph["dynamics"])
    except ValueError as exc:
        raise err("physics", "dynamics", str(exc)) from None

    potential = None
    pot_src = ph["potential"]
    if pot_src.lower() != "none":
        path = Path(pot_src)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise err("physics", "potential", f"potential file {path} does not exist")
        try:
            potential = np.loadtxt(path, dtype=float).ravel()
        except ValueError as exc:
            raise err("physics", "potential", f"unreadable potential file: {exc}") from None
        if potential.shape != (grid.n_points,):
            raise err("physics", "potential",
                      f"potential has {potential.size} samples, grid has {grid.n_points}")

    it = values["integration"]
    if ph["lambda"] is not None and ph["stage_lambdas"] is not None:
        raise err("physics", "stage_lambdas", "give either 'lambda' or 'stage_lambdas'")
    if it["t_end"] is not None and it["stage_durations"] is not None:
        raise err("integration", "stage_durations", "give either 't_end' or 'stage_durations'")
    schedule = None
    if it["stage_durations"] is not None:
        lambdas = ph["stage_lambdas"]
        if lambdas is None:
            lam = ph["lambda"] if ph["lambda"] is not None else 0.0
            lambdas = [lam] * len(it["stage_durations"])
        if len(lambdas) != len(it["stage_durations"]):
            raise err("physics", "stage_lambdas",
                      "stage_lambdas and stage_durations have different lengths")
        stages = list(zip(it["stage_durations"], lambdas))
    elif it["t_end"] is not None:
        if ph["stage_lambdas"] is not None:
            raise err("physics", "stage_lambdas", "stage_lambdas needs stage_durations")
        lam = ph["lambda"] if ph["lambda"] is not None else 0.0
        if ph["lambda"] is None:
            defaults.append("physics.lambda=0.0")
        stages = [(it["t_end"], lam)]
    else:
        stages = None
    if stages is not None:
        try:
            schedule = LambdaSchedule(tuple(stages))
        except ValueError as exc:
            raise err("integration", "stage_durations" if it["stage_durations"] else "t_end",
                      str(exc)) from None
    elif ph["lambda"] is not None and ph["lambda"] < 0:
        raise err("physics", "lambda", "lambda must be >= 0")

    if it["dt"] == "auto":
        dt, dt_auto = auto_dt(grid), True
    else:
        dt, dt_auto = it["dt"], False
        if dt <= 0:
            raise err("integration", "dt", "dt must be positive")
    for key in ("snapshot_stride", "observable_stride", "max_iters"):
        if it[key] < 1:
            raise err("integration", key, f"{key} must be a positive integer")
    if it["tol"] <= 0:
        raise err("integration", "tol", "tol must be positive")

    ini = dict(values["initial"])
    kind = ini["kind"].lower()
    if kind not in _INITIAL_KINDS:
        raise err("initial", "kind", f"initial kind must be one of {_INITIAL_KINDS}")
    ini["kind"] = kind
    if kind == "solitons":
        if not ini["positions"]:
            raise err("initial", "positions", "solitons need 'positions'")
        if ini["speed_fractions"] is None:
            ini["speed_fractions"] = [0.0] * len(ini["positions"])
        if len(ini["speed_fractions"]) != len(ini["positions"]):
            raise err("initial", "speed_fractions", "one speed fraction per position")
        if any(abs(b) >= 1 for b in ini["speed_fractions"]):
            raise err("initial", "speed_fractions", "|speed_fraction| must be < 1")
        if any(not 0 <= x < grid.length for x in ini["positions"]):
            raise err("initial", "positions", "positions must lie in [0, length)")
    if kind == "thermal":
        for key in ("temperature", "mode_cutoff"):
            if ini[key] is None:
                raise err("initial", key, f"thermal initial state needs '{key}'")
        if ini["temperature"] <= 0:
            raise err("initial", "temperature", "temperature must be positive")
        if not 0 < ini["mode_cutoff"] < grid.n_points // 2:
            raise err("initial", "mode_cutoff", "mode_cutoff must be in [1, n_points/2)")
    if ini["seeds"] is None:
        ini["seeds"] = [ini["seed"]]
    if any(s < 0 for s in ini["seeds"]):
        raise err("initial", "seeds", "seeds must be non-negative")
    if kind == "plane_wave" and not abs(ini["mode"]) < grid.n_points // 2:
        raise err("initial", "mode", "mode out of range")
    if kind == "file":
        if ini["path"] is None:
            raise err("initial", "path", "file initial state needs 'path'")
        path = Path(ini["path"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise err("initial", "path", f"initial-state file {path} does not exist")
        ini["path"] = str(path)

    out = values["output"]
    formats = [f.lower() for f in out["formats"]]
    for f in formats:
        if f not in _FORMATS:
            raise err("output", "formats", f"unknown output format {f!r}")
    outdir = Path(out["directory"]) if out["directory"] else None

    disp = dict(values["dispersion"])
    if any(m == 0 for m in disp["modes"]):
        raise err("dispersion", "modes", "dispersion modes must be non-zero")

    return RunConfig(
        grid=grid,
        coupling=ph["coupling"],
        mu=ph["mu"],
        potential=potential,
        potential_source=pot_src,
        dynamics=dynamics,
        schedule=schedule,
        initial=ini,
        dt=dt,
        dt_auto=dt_auto,
        snapshot_stride=it["snapshot_stride"],
        observable_stride=it["observable_stride"],
        renormalize=it["renormalize"],
        tol=it["tol"],
        max_iters=it["max_iters"],
        output_directory=outdir,
        heatmap=out["heatmap"],
        formats=formats,
        dispersion=disp,
        source=source,
        raw={s: {k: v[0] for k, v in kv.items()} for s, kv in sections.items()},
        defaults_used=defaults,
        lambda_value=ph["lambda"] if ph["lambda"] is not None else 0.0,
    )


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=str(path), base_dir=path.parent)
