#!/usr/bin/env python3
"""Fracture experiment harness.

Usage (from backend/):
  python -m scripts.harness run scripts/presets/table1_tension.cfg --out runs/t1
  python -m scripts.harness run --preset table2_compression
  python -m scripts.harness compare runs/t1/curve.csv runs/t1/envelope.csv --tol 56000
  python -m scripts.harness mesh-dump scripts/presets/table2_compression.cfg
  python -m scripts.harness envelope scripts/presets/table1_tension.cfg

Exit codes: 0 success, 1 compare failed, 2 configuration error,
3 numerical failure during a run.

A run directory holds ``curve.csv``, ``summary.txt``, the canonical
``config.cfg`` and, for meshed runs, ``snapshots/NNNN.txt``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

_SCRIPTS_DIR = os.path.dirname(os.path.abspath(__file__))
_BACKEND_DIR = os.path.dirname(_SCRIPTS_DIR)
for _p in (_BACKEND_DIR, _SCRIPTS_DIR):
    if _p not in sys.path:
        sys.path.append(_p)

try:
    import build_info  # type: ignore
    import curves  # type: ignore
    import run_config  # type: ignore
    from fracture import constitutive, mesher, patch_driver, solver  # type: ignore
except Exception:  # pragma: no cover
    from scripts import build_info, curves, run_config  # type: ignore
    from scripts.fracture import constitutive, mesher, patch_driver, solver  # type: ignore

try:
    from config import PRESETS_DIR, SOLVER_WORKERS, configure_logging  # type: ignore
except Exception:  # pragma: no cover
    PRESETS_DIR = Path(_SCRIPTS_DIR) / "presets"
    SOLVER_WORKERS = 1

    def configure_logging(level=None):
        logging.basicConfig(level=level or "INFO")

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COMPARE_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    solver.SolverError,
    constitutive.ConstitutiveError,
    patch_driver.ScheduleError,
    mesher.MeshError,
)


@dataclass(frozen=True)
class RunSummary:
    experiment: str
    peak_stress: float
    peak_displacement: float
    peak_strain: float | None
    dissipated_energy: float
    energy_unit: str
    broken_interfaces: int
    rows: int
    wall_clock_s: float
    config_digest: str
    terminated_by: str = "schedule"
    revision: str = "unknown"

    def as_lines(self) -> list[str]:
        values = {
            "experiment": self.experiment,
            "peak_stress_Pa": repr(self.peak_stress),
            "peak_displacement_m": repr(self.peak_displacement),
            "peak_strain": "" if self.peak_strain is None else repr(self.peak_strain),
            "dissipated_energy": repr(self.dissipated_energy),
            "dissipated_energy_unit": self.energy_unit,
            "broken_interfaces": str(self.broken_interfaces),
            "rows": str(self.rows),
            "terminated_by": self.terminated_by,
            "wall_clock_s": f"{self.wall_clock_s:.3f}",
            "config_digest": self.config_digest,
            "revision": self.revision,
        }
        return [f"{k} = {v}" for k, v in values.items()]


def read_summary(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def preset_path(name: str) -> Path:
    path = Path(PRESETS_DIR) / (name if name.endswith(".cfg") else f"{name}.cfg")
    if not path.is_file():
        known = ", ".join(sorted(p.stem for p in Path(PRESETS_DIR).glob("*.cfg")))
        raise run_config.ConfigError(f"unknown preset {name!r}; available: {known}")
    return path


def list_presets() -> list[str]:
    return sorted(p.stem for p in Path(PRESETS_DIR).glob("*.cfg"))


def _patch_broken(p: constitutive.MaterialParams, record: curves.CurveRecord) -> int:
    if len(record) == 0:
        return 0
    u = float(record.column("u_ieff_m")[-1])
    st = float(constitutive.tensile_strength(p, u))
    c = float(constitutive.cohesion(p, u))
    return int(u >= p.w_max and st <= 0.0 and c <= 0.0)


def _write_snapshot(path: Path, snap: solver.Snapshot) -> None:
    lines = [f"# step {snap.step} time_s {snap.time!r}", "# id mid_x_m mid_y_m damage u_ieff_m broken"]
    for row in snap.rows:
        lines.append(f"{int(row[0])} {float(row[1])!r} {float(row[2])!r} {float(row[3])!r} "
                     f"{float(row[4])!r} {int(row[5])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(cfg: run_config.RunConfig, out_dir: str | Path | None = None) -> RunSummary:
    """Execute one experiment and write its files; returns the summary."""
    out = Path(out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    digest = run_config.config_digest(cfg)
    (out / "config.cfg").write_text(run_config.write_config(cfg), encoding="utf-8")
    started = time.perf_counter()

    if cfg.is_patch:
        sched = cfg.schedule()
        if cfg.experiment == "tension":
            record = patch_driver.run_tension_patch(cfg.material, sched)
            peak_col, x_col = "sigma_n_Pa", "opening_m"
        else:
            record = patch_driver.run_shear_patch(cfg.material, sched)
            peak_col, x_col = "tau_Pa", "slip_m"
        peak, at = record.peak(peak_col)
        summary_kw = dict(
            peak_displacement=float(record.column(x_col)[at]) if at >= 0 else 0.0,
            peak_strain=None,
            energy_unit="J/m2",
            broken_interfaces=_patch_broken(cfg.material, record),
            terminated_by="schedule",
        )
    else:
        mesh = mesher.tessellate(cfg.specimen)
        scfg = cfg.solver_config()
        if scfg.workers == 1 and SOLVER_WORKERS > 1:
            scfg = replace(scfg, workers=SOLVER_WORKERS)
        direction = "compression" if cfg.experiment == "compression" else cfg.direction
        result = solver.run_uniaxial(mesh, cfg.material, scfg, direction)
        record = result.curve
        snap_dir = out / "snapshots"
        if result.snapshots:
            snap_dir.mkdir(exist_ok=True)
            for i, snap in enumerate(result.snapshots):
                _write_snapshot(snap_dir / f"{i:04d}.txt", snap)
        peak, at = record.peak("platen_stress_Pa")
        summary_kw = dict(
            peak_displacement=float(record.column("platen_displacement_m")[at]),
            peak_strain=float(record.column("axial_strain")[at]),
            energy_unit="J/m",
            broken_interfaces=int(record.column("broken_interfaces")[-1]),
            terminated_by=result.terminated_by,
        )

    curves.write_curve(record, out / "curve.csv")
    summary = RunSummary(
        experiment=cfg.experiment,
        peak_stress=float(peak),
        dissipated_energy=float(record.dissipated),
        rows=len(record),
        wall_clock_s=time.perf_counter() - started,
        config_digest=digest,
        revision=build_info.get_build_info().get("label", "unknown"),
        **summary_kw,
    )
    (out / "summary.txt").write_text("\n".join(summary.as_lines()) + "\n", encoding="utf-8")
    logger.info("%s run written to %s (peak %.6g Pa)", cfg.experiment, out, summary.peak_stress)
    return summary


def envelope(cfg: run_config.RunConfig) -> curves.CurveRecord:
    if not cfg.is_patch:
        raise run_config.ConfigError(f"no closed-form envelope for experiment {cfg.experiment!r}")
    return patch_driver.envelope_for(cfg.material, cfg.schedule())


def _load(args) -> run_config.RunConfig:
    if getattr(args, "preset", None):
        return run_config.parse_config(preset_path(args.preset))
    if not args.config:
        raise run_config.ConfigError("give a config file or --preset NAME")
    return run_config.parse_config(args.config)


def _cmd_run(args) -> int:
    cfg = _load(args)
    try:
        summary = run(cfg, args.out)
    except NUMERICAL_ERRORS as exc:
        print(f"❌ numerical failure: {exc}", file=sys.stderr, flush=True)
        return EXIT_NUMERICAL
    for line in summary.as_lines():
        print(line, flush=True)
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        report = curves.compare_curve(args.curve, args.reference, args.tol, args.column)
    except curves.CurveSchemaError as exc:
        print(f"❌ schema error: {exc}", file=sys.stderr, flush=True)
        return EXIT_CONFIG
    print(report.as_text(), flush=True)
    return EXIT_OK if report.passed else EXIT_COMPARE_FAILED


def _cmd_mesh_dump(args) -> int:
    cfg = _load(args)
    if cfg.specimen is None:
        raise run_config.ConfigError(f"experiment {cfg.experiment!r} has no [specimen] section")
    try:
        mesh = mesher.tessellate(cfg.specimen)
    except mesher.MeshError as exc:
        raise run_config.ConfigError(str(exc)) from None
    out = Path(args.out or Path(cfg.output.directory) / "mesh.txt")
    mesher.write_mesh(mesh, out)
    print(f"✅ {mesh.n_particles} particles, {mesh.n_interfaces} interfaces, {mesh.n_nodes} nodes -> {out}",
          flush=True)
    return EXIT_OK


def _cmd_envelope(args) -> int:
    cfg = _load(args)
    record = envelope(cfg)
    out = Path(args.out or Path(cfg.output.directory) / "envelope.csv")
    curves.write_curve(record, out)
    print(f"✅ {len(record)} rows -> {out}", flush=True)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harness", description="Cohesive fracture experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run one experiment")
    p_run.add_argument("config", nargs="?", help="Run configuration file")
    p_run.add_argument("--out", help="Output directory (default: [output] directory)")
    p_run.add_argument("--preset", help="Bundled preset name instead of a file")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="Compare a curve against a reference curve")
    p_cmp.add_argument("curve")
    p_cmp.add_argument("reference")
    p_cmp.add_argument("--tol", type=float, required=True, help="Max pointwise deviation, column units")
    p_cmp.add_argument("--column", help="Column to compare (default: first *_Pa column)")
    p_cmp.set_defaults(func=_cmd_compare)

    p_mesh = sub.add_parser("mesh-dump", help="Write the specimen mesh as columnar text")
    p_mesh.add_argument("config", nargs="?")
    p_mesh.add_argument("--preset")
    p_mesh.add_argument("--out")
    p_mesh.set_defaults(func=_cmd_mesh_dump)

    p_env = sub.add_parser("envelope", help="Write the closed-form curve of a patch experiment")
    p_env.add_argument("config", nargs="?")
    p_env.add_argument("--preset")
    p_env.add_argument("--out")
    p_env.set_defaults(func=_cmd_envelope)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return args.func(args)
    except run_config.ConfigError as exc:
        print(f"❌ config error: {exc}", file=sys.stderr, flush=True)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())

