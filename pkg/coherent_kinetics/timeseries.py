"""
Sampled trajectories and their CSV form.

A TimeSeries pairs strictly increasing sample times with validated density
operators. to_frame() flattens it into the CSV layout used by `simulate`:

    t, re_rho_1_1, im_rho_1_1, re_rho_1_2, ..., trace, min_eig, herm_defect

with the upper triangle (including the diagonal) in row-major order and
1-based indices.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .densop import BasisLabel, DensityOperator, LabelLike, TraceClass, matrix_element, new_density
from .errors import DiagnosticFailure, DimensionMismatch, KineticsError

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    snapshots: Tuple[DensityOperator, ...]

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or len(times) != len(self.snapshots):
            raise DimensionMismatch(f"{len(times)} times for {len(self.snapshots)} snapshots")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise KineticsError("Sample times must be strictly increasing")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "snapshots", tuple(self.snapshots))

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def basis(self) -> Tuple[BasisLabel, ...]:
        return self.snapshots[0].basis

    @property
    def final(self) -> DensityOperator:
        return self.snapshots[-1]

    def element(self, bra: LabelLike, ket: LabelLike) -> np.ndarray:
        """<bra|rho(t)|ket> at every sample."""
        return np.array([matrix_element(rho, bra, ket) for rho in self.snapshots])

    def diagnostics(self) -> pd.DataFrame:
        """Per-sample trace, minimum eigenvalue and Hermiticity defect."""
        return pd.DataFrame(
            {
                "t": self.times,
                "trace": [float(np.trace(rho.entries).real) for rho in self.snapshots],
                "min_eig": [rho.min_eig for rho in self.snapshots],
                "herm_defect": [rho.herm_defect for rho in self.snapshots],
            }
        )

    def to_frame(self) -> pd.DataFrame:
        dim = self.snapshots[0].dim
        stack = np.array([rho.entries for rho in self.snapshots])
        columns = {"t": self.times}
        for i in range(dim):
            for j in range(i, dim):
                columns[f"re_rho_{i + 1}_{j + 1}"] = stack[:, i, j].real
                columns[f"im_rho_{i + 1}_{j + 1}"] = stack[:, i, j].imag
        frame = pd.DataFrame(columns)
        diagnostics = self.diagnostics()
        for name in ("trace", "min_eig", "herm_defect"):
            frame[name] = diagnostics[name].to_numpy()
        return frame


def from_matrices(
    times: Sequence[float],
    matrices: Iterable[np.ndarray],
    basis: Sequence[BasisLabel],
    trace_class: TraceClass,
) -> TimeSeries:
    """Validate each propagated matrix; a failure names the offending sample."""
    snapshots: List[DensityOperator] = []
    for index, matrix in enumerate(matrices):
        try:
            snapshots.append(new_density(matrix, basis, trace_class))
        except KineticsError as exc:
            raise DiagnosticFailure(f"{type(exc).__name__}: {exc}", sample_index=index) from exc
    return TimeSeries(np.asarray(times, dtype=float), tuple(snapshots))


def write_csv_atomic(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write frame with fixed 17-digit floats, moved into place with os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    frame.to_csv(tmp, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    os.replace(tmp, path)
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path
