import numpy as np
import pytest

from curves import (
    COMPRESSION_COLUMNS,
    SHEAR_COLUMNS,
    TENSION_COLUMNS,
    CurveRecord,
    CurveSchemaError,
    compare_curve,
    compare_curves,
    read_curve,
    write_curve,
)


def _tension(sigma):
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    rows = np.zeros((n, len(TENSION_COLUMNS)))
    rows[:, 0] = np.arange(n)
    rows[:, 2] = np.linspace(0.0, 1e-5, n)
    rows[:, 3] = sigma
    return CurveRecord(TENSION_COLUMNS, rows, kind="tension")


def test_tension_header_is_fixed(tmp_path):
    path = write_curve(_tension([0.0, 1.0e6, 2.0e6]), tmp_path / "curve.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,time_s,opening_m,sigma_n_Pa,u_ieff_m,damage,alpha,k_ns_Pa_per_m,sigma_t_Pa"
    assert lines[1].startswith("0,")
    assert lines[3].split(",")[0] == "2"
    assert len(lines) == 4


def test_compression_header_is_fixed():
    assert ",".join(COMPRESSION_COLUMNS) == (
        "step,time_s,platen_displacement_m,axial_strain,platen_stress_Pa,"
        "yielded_interfaces,broken_interfaces,max_damage,kinetic_ratio"
    )


def test_written_curve_reads_back_exactly(tmp_path):
    original = _tension([0.0, 1.234567890123e6, 2.0e6 / 3.0])
    back = read_curve(write_curve(original, tmp_path / "c.csv"))
    assert back.kind == "tension"
    assert back.columns == TENSION_COLUMNS
    assert np.array_equal(back.rows, original.rows)


def test_peak_and_column_lookup():
    curve = _tension([0.0, 3.0, 5.0, 5.0, 1.0])
    assert curve.peak("sigma_n_Pa") == (5.0, 2)
    with pytest.raises(KeyError):
        curve.column("tau_Pa")
    empty = CurveRecord(TENSION_COLUMNS, [])
    assert len(empty) == 0
    assert empty.peak("sigma_n_Pa") == (0.0, -1)


def test_rows_must_match_the_columns():
    with pytest.raises(CurveSchemaError):
        CurveRecord(TENSION_COLUMNS, np.zeros((3, 4)))


def test_compare_against_itself_passes():
    curve = _tension([0.0, 1.0, 2.0])
    report = compare_curves(curve, curve, 0.0)
    assert report.passed
    assert report.max_deviation == 0.0
    assert report.column == "sigma_n_Pa"
    assert report.rows_compared == 3


def test_compare_reports_the_worst_row():
    curve = _tension([0.0, 1.0e6, 2.0e6, 1.0e6])
    reference = _tension([0.0, 1.0e6, 1.9e6, 1.0e6])
    report = compare_curves(curve, reference, 5.0e4)
    assert not report.passed
    assert report.at_row == 2
    assert report.max_deviation == pytest.approx(1.0e5)
    assert report.as_text().startswith("FAIL column=sigma_n_Pa")


def test_compare_interpolates_a_differently_sampled_reference():
    curve = _tension([0.0, 1.0, 2.0, 3.0, 4.0])
    coarse = _tension([0.0, 2.0, 4.0])
    report = compare_curves(curve, coarse, 1e-9)
    assert report.passed, report.as_text()


def test_compare_needs_matching_headers(tmp_path):
    shear_rows = np.zeros((2, len(SHEAR_COLUMNS)))
    a = write_curve(_tension([0.0, 1.0]), tmp_path / "a.csv")
    b = write_curve(CurveRecord(SHEAR_COLUMNS, shear_rows), tmp_path / "b.csv")
    with pytest.raises(CurveSchemaError, match="column mismatch"):
        compare_curve(a, b, 1.0)


def test_read_rejects_ragged_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(",".join(TENSION_COLUMNS) + "\n1,2,3\n", encoding="utf-8")
    with pytest.raises(CurveSchemaError, match=":2:"):
        read_curve(path)
    (tmp_path / "empty.csv").write_text("", encoding="utf-8")
    with pytest.raises(CurveSchemaError, match="empty"):
        read_curve(tmp_path / "empty.csv")
