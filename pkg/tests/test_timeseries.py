import numpy as np
import pandas as pd
import pytest

from coherent_kinetics.densop import TraceClass, minimal_basis, pure_state
from coherent_kinetics.errors import DiagnosticFailure, DimensionMismatch, KineticsError
from coherent_kinetics.timeseries import TimeSeries, from_matrices, write_csv_atomic


def two_samples():
    matrices = [np.diag([1.0, 0.0]), np.array([[0.5, 0.25j], [-0.25j, 0.5]])]
    return from_matrices([0.0, 1.0], matrices, minimal_basis(), TraceClass.NORMALIZED)


def test_frame_layout():
    frame = two_samples().to_frame()
    assert list(frame.columns) == [
        "t",
        "re_rho_1_1",
        "im_rho_1_1",
        "re_rho_1_2",
        "im_rho_1_2",
        "re_rho_2_2",
        "im_rho_2_2",
        "trace",
        "min_eig",
        "herm_defect",
    ]
    assert frame["im_rho_1_2"].tolist() == [0.0, 0.25]
    np.testing.assert_allclose(frame["min_eig"], [0.0, 0.25], atol=1e-15)


def test_element_by_label():
    series = two_samples()
    np.testing.assert_allclose(series.element("S", "T"), [0, 0.25j])
    assert series.final.trace_class is TraceClass.NORMALIZED


def test_failed_sample_is_named():
    matrices = [np.diag([1.0, 0.0]), np.array([[0.5, 0.6], [0.6, 0.5]])]
    with pytest.raises(DiagnosticFailure) as exc_info:
        from_matrices([0.0, 1.0], matrices, minimal_basis(), TraceClass.NORMALIZED)
    assert exc_info.value.sample_index == 1
    assert str(exc_info.value).startswith("sample 1: NegativeEigenvalue")


def test_times_must_increase():
    state = pure_state("S", minimal_basis())
    with pytest.raises(KineticsError):
        TimeSeries([1.0, 1.0], (state, state))
    with pytest.raises(DimensionMismatch):
        TimeSeries([0.0], (state, state))


def test_csv_is_written_with_full_precision(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 1.0 / 3.0]})
    path = write_csv_atomic(frame, tmp_path / "out" / "series.csv")
    assert path.read_text() == "t\n0\n0.33333333333333331\n"
    assert not (tmp_path / "out" / "series.csv.tmp").exists()
