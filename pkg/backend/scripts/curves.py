#!/usr/bin/env python3
"""Curve records and their CSV files.

Every experiment produces one table of samples with a fixed column order. The
orders below are part of the file format: tools downstream (and the golden
tests) rely on them, so columns are only ever appended, never reordered.

Values are written with ``repr(float)``, which round-trips exactly and is the
same on every platform, so rerunning a preset gives a byte-identical file.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


TENSION_COLUMNS = (
    "step", "time_s", "opening_m", "sigma_n_Pa", "u_ieff_m",
    "damage", "alpha", "k_ns_Pa_per_m", "sigma_t_Pa",
)
SHEAR_COLUMNS = (
    "step", "time_s", "slip_m", "tau_Pa", "u_ieff_m",
    "damage", "alpha", "k_ss_Pa_per_m", "cohesion_Pa",
)
MIXED_COLUMNS = (
    "step", "time_s", "opening_m", "slip_m", "sigma_n_Pa", "tau_Pa",
    "u_ieff_m", "damage", "alpha",
)
COMPRESSION_COLUMNS = (
    "step", "time_s", "platen_displacement_m", "axial_strain", "platen_stress_Pa",
    "yielded_interfaces", "broken_interfaces", "max_damage", "kinetic_ratio",
)

SCHEMAS = {
    "tension": TENSION_COLUMNS,
    "shear": SHEAR_COLUMNS,
    "mixed": MIXED_COLUMNS,
    "compression": COMPRESSION_COLUMNS,
}

# Written as integers.
_COUNT_COLUMNS = frozenset({"step", "yielded_interfaces", "broken_interfaces"})


class CurveSchemaError(ValueError):
    """Two curve files do not share a header, or a file has no usable header."""


@dataclass
class CurveRecord:
    columns: tuple[str, ...]
    rows: np.ndarray
    dissipated: float = 0.0
    kind: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(self.columns))
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise CurveSchemaError(
                f"rows have shape {rows.shape}, expected (n, {len(self.columns)})"
            )
        self.rows = rows

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.rows[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"no column {name!r} in {self.columns}") from None

    def peak(self, name: str) -> tuple[float, int]:
        """Largest value of a column and the row it occurs on (first on ties)."""
        values = self.column(name)
        if values.size == 0:
            return 0.0, -1
        i = int(np.argmax(values))
        return float(values[i]), i


def _format(name: str, value: float) -> str:
    if name in _COUNT_COLUMNS:
        return str(int(value))
    return repr(float(value))


def write_curve(record: CurveRecord, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(record.columns)
        for row in record.rows:
            writer.writerow([_format(n, v) for n, v in zip(record.columns, row)])
    logger.debug("wrote %d rows to %s", len(record), path)
    return path


def read_curve(path: str | Path) -> CurveRecord:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CurveSchemaError(f"{path}: empty file") from None
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise CurveSchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(raw)}")
            try:
                rows.append([float(v) for v in raw])
            except ValueError:
                raise CurveSchemaError(f"{path}:{lineno}: non-numeric value") from None
    kind = next((k for k, cols in SCHEMAS.items() if tuple(header) == cols), "")
    return CurveRecord(columns=tuple(header), rows=np.asarray(rows, dtype=float).reshape(-1, len(header)), kind=kind)


@dataclass(frozen=True)
class CompareReport:
    passed: bool
    column: str
    max_deviation: float
    at_row: int
    rows_compared: int
    tolerance: float

    def as_text(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} column={self.column} max_deviation={self.max_deviation!r} "
            f"at_row={self.at_row} rows={self.rows_compared} tol={self.tolerance!r}"
        )


def default_compare_column(columns: tuple[str, ...]) -> str:
    """First traction/stress column of a schema."""
    for name in columns:
        if name.endswith("_Pa"):
            return name
    raise CurveSchemaError(f"no stress column in {columns}")


def compare_curves(curve: CurveRecord, reference: CurveRecord, tolerance: float,
                   column: str | None = None) -> CompareReport:
    """Pointwise deviation of one column against a reference curve.

    Samples are matched on the schema's abscissa (its third column, the
    applied displacement). When the two curves were sampled at different
    abscissae the reference is linearly interpolated onto the curve's.
    """
    if curve.columns != reference.columns:
        raise CurveSchemaError(f"column mismatch: {curve.columns} vs {reference.columns}")
    if not tolerance >= 0.0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance!r}")
    name = column or default_compare_column(curve.columns)
    if name not in curve.columns:
        raise CurveSchemaError(f"no column {name!r} in {curve.columns}")
    if len(curve) == 0 or len(reference) == 0:
        return CompareReport(len(curve) == len(reference), name, 0.0, -1, 0, float(tolerance))

    x_name = curve.columns[2]
    x = curve.column(x_name)
    x_ref = reference.column(x_name)
    y = curve.column(name)
    y_ref = reference.column(name)
    if x.shape == x_ref.shape and np.array_equal(x, x_ref):
        expected = y_ref
    else:
        order = np.argsort(x_ref, kind="stable")
        expected = np.interp(x, x_ref[order], y_ref[order])

    deviation = np.abs(y - expected)
    i = int(np.argmax(deviation))
    worst = float(deviation[i])
    return CompareReport(
        passed=bool(worst <= tolerance),
        column=name,
        max_deviation=worst,
        at_row=i,
        rows_compared=int(deviation.size),
        tolerance=float(tolerance),
    )


def compare_curve(curve_path: str | Path, reference_path: str | Path, tolerance: float,
                  column: str | None = None) -> CompareReport:
    return compare_curves(read_curve(curve_path), read_curve(reference_path), tolerance, column)
