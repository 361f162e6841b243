#!/usr/bin/env python3
"""Run configuration files: parse, validate, write.

Format: ``[section]`` headers and ``key = value`` lines, ``#`` comments.
Dimensional values must carry a unit (``sigma_t0 = 2.8 MPa``); they are
converted to SI on read and written back in SI, so ``write_config`` output is
the canonical form the run digest is taken over.

    [run]       experiment (tension | shear | compression | custom), direction
    [material]  MaterialParams fields
    [load]      patch schedule (tension, shear)
    [specimen]  SpecimenSpec fields (compression, custom)
    [solver]    SolverConfig fields (compression, custom)
    [output]    directory, sample_interval, snapshot_interval
"""

from __future__ import annotations

import difflib
import hashlib
import logging
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

_SCRIPTS_DIR = os.path.dirname(os.path.abspath(__file__))
_BACKEND_DIR = os.path.dirname(_SCRIPTS_DIR)
for _p in (_BACKEND_DIR, _SCRIPTS_DIR):
    if _p not in sys.path:
        sys.path.append(_p)

try:
    from fracture.constitutive import MaterialParams  # type: ignore
    from fracture.mesher import SpecimenSpec  # type: ignore
    from fracture.patch_driver import DEFAULT_SHEAR_PRELOAD, LoadSchedule  # type: ignore
    from fracture.solver import SolverConfig  # type: ignore
except Exception:  # pragma: no cover
    from scripts.fracture.constitutive import MaterialParams  # type: ignore
    from scripts.fracture.mesher import SpecimenSpec  # type: ignore
    from scripts.fracture.patch_driver import DEFAULT_SHEAR_PRELOAD, LoadSchedule  # type: ignore
    from scripts.fracture.solver import SolverConfig  # type: ignore

try:
    from config import OUTPUT_DIR  # type: ignore
except Exception:  # pragma: no cover
    OUTPUT_DIR = "runs"

logger = logging.getLogger(__name__)

EXPERIMENTS = ("tension", "shear", "compression", "custom")

UNITS = {
    "stress": {"Pa": 1.0, "kPa": 1.0e3, "MPa": 1.0e6, "GPa": 1.0e9},
    "stiffness": {"Pa/m": 1.0, "MPa/m": 1.0e6, "GPa/m": 1.0e9},
    "length": {"m": 1.0, "mm": 1.0e-3, "um": 1.0e-6},
    "density": {"kg/m3": 1.0},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "time": {"s": 1.0},
    "velocity": {"m/s": 1.0, "mm/s": 1.0e-3},
}
# Unit written by write_config for each kind.
SI_UNIT = {"stress": "Pa", "stiffness": "Pa/m", "length": "m", "density": "kg/m3",
           "angle": "rad", "time": "s", "velocity": "m/s"}

# key -> kind; kinds outside UNITS are "number", "count", "bool", "text".
SCHEMA: dict[str, dict[str, str]] = {
    "run": {"experiment": "text", "direction": "text"},
    "material": {
        "rho": "density", "youngs": "stress", "poisson": "number",
        "friction_angle": "angle", "dilation_angle": "angle",
        "kn0": "stiffness", "ks0": "stiffness", "sigma_t0": "stress", "c0": "stress",
        "w_sigma": "length", "w_c": "length", "eta": "number",
    },
    "load": {
        "steps": "count", "n_substeps": "count", "total_displacement": "length",
        "normal_preload": "stress", "step_time": "time",
    },
    "specimen": {
        "width": "length", "height": "length", "particle_size": "length",
        "pattern": "text", "seed": "count",
    },
    "solver": {
        "damping_coefficient": "number", "timestep_safety": "number",
        "loading_velocity": "velocity", "max_steps": "count",
        "quasi_static_tolerance": "number", "peak_drop_fraction": "number",
        "max_displacement": "length", "glued_platens": "bool",
        "n_substeps": "count", "workers": "count",
    },
    "output": {"directory": "text", "sample_interval": "count", "snapshot_interval": "count"},
}

_OPTIONAL = {
    "run": {"direction"},
    "material": {"eta"},
    "load": {"n_substeps", "normal_preload", "step_time"},
    "specimen": {"pattern", "seed"},
    "solver": set(SCHEMA["solver"]) - {"loading_velocity"},
    "output": set(SCHEMA["output"]),
}

_SECTIONS_FOR = {
    "tension": ("run", "material", "load"),
    "shear": ("run", "material", "load"),
    "compression": ("run", "material", "specimen", "solver"),
    "custom": ("run", "material", "specimen", "solver"),
}


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` is 1-based, or None for whole-file problems."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = path or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.message = message


@dataclass(frozen=True)
class LoadSpec:
    steps: int = 2000
    total_displacement: float = 0.0
    n_substeps: int = 10
    normal_preload: float = 0.0
    step_time: float = 1.0

    def schedule(self, mode: str) -> LoadSchedule:
        return LoadSchedule(
            mode=mode,
            steps=self.steps,
            displacement_increment=self.total_displacement / self.steps,
            normal_preload=self.normal_preload,
            n_substeps=self.n_substeps,
            step_time=self.step_time,
        )


@dataclass(frozen=True)
class OutputSpec:
    directory: str = OUTPUT_DIR
    sample_interval: int = 1000
    snapshot_interval: int = 0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    material: MaterialParams
    load: LoadSpec | None = None
    specimen: SpecimenSpec | None = None
    solver: SolverConfig | None = None
    output: OutputSpec = OutputSpec()
    direction: str = "compression"

    @property
    def is_patch(self) -> bool:
        return self.experiment in ("tension", "shear")

    def schedule(self) -> LoadSchedule:
        if self.load is None:
            raise ConfigError(f"experiment {self.experiment!r} has no [load] section")
        return self.load.schedule(self.experiment)

    def solver_config(self) -> SolverConfig:
        """SolverConfig with the output cadence folded in."""
        if self.solver is None:
            raise ConfigError(f"experiment {self.experiment!r} has no [solver] section")
        values = {f.name: getattr(self.solver, f.name) for f in fields(SolverConfig)}
        values["output_interval"] = self.output.sample_interval
        values["snapshot_interval"] = self.output.snapshot_interval
        return SolverConfig(**values)


def _nearest(word: str, choices) -> str:
    match = difflib.get_close_matches(word, list(choices), n=1, cutoff=0.5)
    return f"; did you mean {match[0]!r}?" if match else ""


def _convert(kind: str, raw: str, key: str, line: int, path: str | None):
    if kind == "text":
        if not raw:
            raise ConfigError(f"{key} needs a value", line, path)
        return raw
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key} must be true or false, got {raw!r}", line, path)
    parts = raw.split()
    if kind in ("number", "count"):
        if len(parts) != 1:
            raise ConfigError(f"{key} is dimensionless; drop the unit in {raw!r}", line, path)
        try:
            value = float(parts[0])
        except ValueError:
            raise ConfigError(f"{key}: {parts[0]!r} is not a number", line, path) from None
        if kind == "count":
            if not value.is_integer():
                raise ConfigError(f"{key} must be a whole number, got {raw!r}", line, path)
            return int(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite, got {raw!r}", line, path)
        return value
    units = UNITS[kind]
    if len(parts) != 2:
        raise ConfigError(
            f"{key} needs a unit ({', '.join(units)}), got {raw!r}", line, path
        )
    number, unit = parts
    if unit not in units:
        raise ConfigError(
            f"{key}: unit {unit!r} is not a {kind} unit; use one of {', '.join(units)}", line, path
        )
    try:
        value = float(number)
    except ValueError:
        raise ConfigError(f"{key}: {number!r} is not a number", line, path) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {raw!r}", line, path)
    if kind == "angle" and unit == "deg":
        return math.radians(value)
    return value * units[unit]


def parse_config_text(text: str, path: str | None = None) -> RunConfig:
    sections: dict[str, dict[str, object]] = {}
    header_line: dict[str, int] = {}
    current: str | None = None

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw_line.strip()!r}", lineno, path)
            name = line[1:-1].strip()
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]{_nearest(name, SCHEMA)}", lineno, path)
            if name in sections:
                raise ConfigError(f"section [{name}] appears twice", lineno, path)
            sections[name] = {}
            header_line[name] = lineno
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", lineno, path)
        if current is None:
            raise ConfigError("key outside of any [section]", lineno, path)
        key, value = (part.strip() for part in line.split("=", 1))
        keys = SCHEMA[current]
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in [{current}]{_nearest(key, keys)}", lineno, path)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno, path)
        sections[current][key] = (_convert(keys[key], value, key, lineno, path), lineno)

    if "run" not in sections or "experiment" not in sections["run"]:
        raise ConfigError("missing [run] experiment", header_line.get("run"), path)
    experiment, exp_line = sections["run"]["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}{_nearest(experiment, EXPERIMENTS)}", exp_line, path)
    needed = _SECTIONS_FOR[experiment]
    for name in needed:
        if name not in sections:
            raise ConfigError(f"experiment {experiment!r} needs a [{name}] section", None, path)
    for name in sections:
        if name not in needed and name != "output":
            raise ConfigError(f"[{name}] is not used by experiment {experiment!r}", header_line[name], path)
    for name in needed:
        missing = [k for k in SCHEMA[name] if k not in _OPTIONAL[name] and k not in sections[name]]
        if missing:
            raise ConfigError(f"[{name}] is missing {', '.join(missing)}", header_line[name], path)

    def values(name: str) -> dict[str, object]:
        return {k: v for k, (v, _) in sections.get(name, {}).items()}

    def build(name: str, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}", header_line.get(name), path) from None

    run = values("run")
    direction = run.get("direction", "compression")
    if direction not in ("compression", "tension"):
        raise ConfigError(f"direction must be compression or tension, got {direction!r}",
                          sections["run"]["direction"][1], path)
    if "direction" in run and experiment != "custom":
        raise ConfigError("direction only applies to custom runs", sections["run"]["direction"][1], path)

    mat = values("material")
    if "eta" not in mat:
        logger.info("[material] eta not given; using eta = 0 (all inelastic displacement is fracturing)")
    material = build("material", MaterialParams, **mat)

    load = specimen = solver = None
    if experiment in ("tension", "shear"):
        raw = values("load")
        if experiment == "shear":
            raw.setdefault("normal_preload", DEFAULT_SHEAR_PRELOAD)
        load = build("load", LoadSpec, **raw)
        build("load", load.schedule, mode=experiment)
    else:
        specimen = build("specimen", SpecimenSpec, **values("specimen"))
        solver = build("solver", SolverConfig, **values("solver"))

    output = build("output", OutputSpec, **values("output"))
    return RunConfig(experiment, material, load, specimen, solver, output, direction)


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror or exc}", None, str(path)) from None
    return parse_config_text(text, str(path))


def _fmt(kind: str, value) -> str:
    if kind == "text":
        return str(value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "count":
        return str(int(value))
    if kind == "number":
        return repr(float(value))
    return f"{float(value)!r} {SI_UNIT[kind]}"


def write_config(cfg: RunConfig) -> str:
    """Canonical SI text; parse_config_text(write_config(c)) == c."""
    out = ["[run]", f"experiment = {cfg.experiment}"]
    if cfg.experiment == "custom":
        out.append(f"direction = {cfg.direction}")
    blocks = [("material", cfg.material)]
    if cfg.load is not None:
        blocks.append(("load", cfg.load))
    if cfg.specimen is not None:
        blocks.append(("specimen", cfg.specimen))
    if cfg.solver is not None:
        blocks.append(("solver", cfg.solver))
    blocks.append(("output", cfg.output))
    for name, obj in blocks:
        out += ["", f"[{name}]"]
        for key, kind in SCHEMA[name].items():
            out.append(f"{key} = {_fmt(kind, getattr(obj, key))}")
    return "\n".join(out) + "\n"


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(write_config(cfg).encode("utf-8")).hexdigest()
