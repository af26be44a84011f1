"""
Density operators over labeled site and occupation bases.

Every other module hands states around as DensityOperator values. They are
built through new_density(), which validates Hermiticity, trace and positivity
and records the diagnostics it measured while doing so.

Internal indices are 0-based; site labels shown to users are 1-based so that
site 1 is psi_1, site 2 is psi_2, and so on.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BadProbability,
    DimensionMismatch,
    NegativeEigenvalue,
    NonHermitian,
    TraceOutOfRange,
    UnknownLabel,
)

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
POSITIVITY_TOL = 1e-10

# Display names of the canonical graphs, keyed by number of sites.
SITE_NAMES = {
    2: ("S", "T"),
    3: ("S", "P", "T"),
    4: ("S", "P_S", "T", "P_T"),
}

# Reduced radical-pair basis after tracing out the products: |n_1, n_3>.
REDUCED_NAMES = (((0, 0), "N"), ((0, 1), "T"), ((1, 0), "S"))


# ---------------------------------------------------------------------------
# Basis labels
# ---------------------------------------------------------------------------

class LabelKind(enum.Enum):
    SITE = "site"
    OCCUPATION = "occupation"
    NAMED = "named"


@dataclass(frozen=True)
class BasisLabel:
    """One basis ket: a 1-based site, an occupation bit-vector, or a name.

    The display name and the dimension context do not take part in equality,
    so site 1 called "S" equals plain site 1.
    """

    kind: LabelKind
    value: Union[int, Tuple[int, ...], str]
    name: Optional[str] = field(default=None, compare=False)
    n_sites: Optional[int] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind is LabelKind.SITE:
            if not isinstance(self.value, (int, np.integer)) or self.value < 1:
                raise UnknownLabel(f"Expected a 1-based site index, got: {self.value!r}")
            if self.n_sites is not None and self.value > self.n_sites:
                raise UnknownLabel(f"Site {self.value} outside 1..{self.n_sites}")
        elif self.kind is LabelKind.OCCUPATION:
            bits = tuple(self.value)
            if any(b not in (0, 1) for b in bits):
                raise UnknownLabel(f"Occupation numbers must be 0 or 1, got: {bits!r}")
            if sum(bits) > 1:
                raise UnknownLabel(f"At most one walker per state, got: {bits!r}")
            object.__setattr__(self, "value", bits)
        elif not isinstance(self.value, str) or not self.value:
            raise UnknownLabel(f"Expected a non-empty name, got: {self.value!r}")

    @classmethod
    def site(cls, index: int, n_sites: Optional[int] = None, name: Optional[str] = None) -> "BasisLabel":
        return cls(LabelKind.SITE, int(index), name=name, n_sites=n_sites)

    @classmethod
    def occupation(cls, bits: Sequence[int], name: Optional[str] = None) -> "BasisLabel":
        return cls(LabelKind.OCCUPATION, tuple(int(b) for b in bits), name=name, n_sites=len(bits))

    @classmethod
    def named(cls, name: str) -> "BasisLabel":
        return cls(LabelKind.NAMED, name, name=name)

    @property
    def display(self) -> str:
        if self.name:
            return self.name
        if self.kind is LabelKind.SITE:
            return str(self.value)
        if self.kind is LabelKind.OCCUPATION:
            return "|" + ",".join(str(b) for b in self.value) + ">"
        return str(self.value)

    def as_named(self) -> "BasisLabel":
        if self.kind is LabelKind.NAMED:
            return self
        if not self.name:
            raise UnknownLabel(f"Label {self.display} has no name")
        return BasisLabel.named(self.name)

    def __str__(self) -> str:
        return self.display


Basis = Tuple[BasisLabel, ...]
LabelLike = Union[BasisLabel, int, str]


def site_basis(n_sites: int, names: Optional[Sequence[Optional[str]]] = None) -> Basis:
    """Site labels 1..n_sites, named after the canonical graph when there is one."""
    if n_sites < 1:
        raise DimensionMismatch(f"Expected a positive number of sites, got: {n_sites!r}")
    if names is None:
        names = SITE_NAMES.get(n_sites, (None,) * n_sites)
    if len(names) != n_sites:
        raise DimensionMismatch(f"{len(names)} names given for {n_sites} sites")
    given = [name for name in names if name is not None]
    if len(set(given)) != len(given):
        raise UnknownLabel(f"Expected distinct site names, got: {list(names)!r}")
    return tuple(BasisLabel.site(i + 1, n_sites, name) for i, name in enumerate(names))


def minimal_basis() -> Basis:
    """The two-state {|S>, |T>} basis used by the literature operators."""
    return site_basis(2)


def reduced_basis() -> Basis:
    """The {|N>, |T>, |S>} basis of the radical pair with products traced out."""
    return tuple(BasisLabel.occupation(bits, name) for bits, name in REDUCED_NAMES)


def occupation_basis(n_modes: int) -> Basis:
    """Single-walker occupation kets |0..1..0> for n_modes sites, in site order."""
    labels = []
    for k in range(n_modes):
        bits = [0] * n_modes
        bits[k] = 1
        labels.append(BasisLabel.occupation(bits))
    return tuple(labels)


def coerce_label(label: LabelLike) -> BasisLabel:
    """Accept a BasisLabel, a 1-based site number, or a name."""
    if isinstance(label, BasisLabel):
        return label
    if isinstance(label, (int, np.integer)):
        return BasisLabel.site(int(label))
    text = str(label).strip()
    if text.isdigit():
        return BasisLabel.site(int(text))
    return BasisLabel.named(text)


def resolve(label: LabelLike, basis: Sequence[BasisLabel]) -> int:
    """Return the 0-based position of label in basis."""
    label = coerce_label(label)
    for i, candidate in enumerate(basis):
        if label.kind is LabelKind.NAMED:
            if candidate.name == label.value:
                return i
        elif candidate == label:
            return i
    shown = ", ".join(b.display for b in basis)
    raise UnknownLabel(f"Label {label.display!r} not in basis [{shown}]")


# ---------------------------------------------------------------------------
# Density operators
# ---------------------------------------------------------------------------

class TraceClass(enum.Enum):
    NORMALIZED = "normalized"
    SUBNORMALIZED = "subnormalized"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A validated, read-only density matrix. Build it with new_density()."""

    entries: np.ndarray
    basis: Basis
    trace_class: TraceClass
    herm_defect: float
    min_eig: float

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __repr__(self) -> str:
        return (
            f"DensityOperator(dim={self.dim}, trace={trace(self):.12g}, "
            f"class={self.trace_class.value}, min_eig={self.min_eig:.3g})"
        )


def _defect(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.abs(matrix - matrix.conj().T).max())


def new_density(
    entries: Union[np.ndarray, Sequence[Sequence[complex]]],
    basis: Optional[Sequence[BasisLabel]] = None,
    trace_class: TraceClass = TraceClass.NORMALIZED,
) -> DensityOperator:
    """Validate entries as a density operator over basis.

    The basis defaults to the site basis of matching dimension.
    """
    matrix = np.array(entries, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionMismatch(f"Expected a non-empty square matrix, got shape {matrix.shape}")
    dim = matrix.shape[0]
    basis = site_basis(dim) if basis is None else tuple(basis)
    if len(basis) != dim:
        raise DimensionMismatch(f"Basis has {len(basis)} labels for a {dim}x{dim} matrix")

    defect = _defect(matrix)
    if defect > HERMITICITY_TOL:
        raise NonHermitian(f"Hermiticity defect {defect:.3g} exceeds {HERMITICITY_TOL:g}")

    tr = np.trace(matrix)
    if abs(tr.imag) > HERMITICITY_TOL:
        raise TraceOutOfRange(f"Trace is not real: {tr!r}")
    if not -TRACE_TOL <= tr.real <= 1.0 + TRACE_TOL:
        raise TraceOutOfRange(f"Trace {tr.real:.15g} outside [0, 1]")
    if trace_class is TraceClass.NORMALIZED and abs(tr.real - 1.0) > NORMALIZATION_TOL:
        raise TraceOutOfRange(f"Normalized state has trace {tr.real:.15g}")

    lowest = float(np.linalg.eigvalsh(0.5 * (matrix + matrix.conj().T)).min())
    if lowest < -POSITIVITY_TOL:
        raise NegativeEigenvalue(f"Minimum eigenvalue {lowest:.3g} below -{POSITIVITY_TOL:g}")

    matrix.flags.writeable = False
    return DensityOperator(matrix, basis, trace_class, defect, lowest)


def matrix_element(rho: DensityOperator, bra: LabelLike, ket: LabelLike) -> complex:
    """<bra|rho|ket>."""
    return complex(rho.entries[resolve(bra, rho.basis), resolve(ket, rho.basis)])


def trace(rho: DensityOperator) -> float:
    return float(np.trace(rho.entries).real)


def min_eigenvalue(rho: DensityOperator) -> float:
    return rho.min_eig


def hermiticity_defect(rho: DensityOperator) -> float:
    return rho.herm_defect


def as_matrix(rho: Union[DensityOperator, np.ndarray]) -> np.ndarray:
    """Entries of a state, or a square array used as a linear probe."""
    if isinstance(rho, DensityOperator):
        return rho.entries
    matrix = np.asarray(rho, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"Expected a square matrix, got shape {matrix.shape}")
    return matrix


# ---------------------------------------------------------------------------
# Common states
# ---------------------------------------------------------------------------

def pure_state(label: LabelLike, basis: Sequence[BasisLabel]) -> DensityOperator:
    """|label><label|."""
    basis = tuple(basis)
    matrix = np.zeros((len(basis), len(basis)), dtype=complex)
    i = resolve(label, basis)
    matrix[i, i] = 1.0
    return new_density(matrix, basis)


def mixture(weights: Mapping[LabelLike, float], basis: Sequence[BasisLabel]) -> DensityOperator:
    """Diagonal state sum_k w_k |k><k|; weights must sum to one."""
    basis = tuple(basis)
    matrix = np.zeros((len(basis), len(basis)), dtype=complex)
    for label, weight in weights.items():
        if weight < 0:
            raise BadProbability(f"Negative weight {weight!r} for {label!r}")
        i = resolve(label, basis)
        matrix[i, i] += weight
    return new_density(matrix, basis)


def superposition(amplitudes: Mapping[LabelLike, complex], basis: Sequence[BasisLabel]) -> DensityOperator:
    """Pure state proportional to sum_k a_k |k>."""
    basis = tuple(basis)
    vector = np.zeros(len(basis), dtype=complex)
    for label, amplitude in amplitudes.items():
        vector[resolve(label, basis)] += complex(amplitude)
    norm = np.linalg.norm(vector)
    if norm == 0:
        raise BadProbability("Amplitudes must not all be zero")
    vector /= norm
    return new_density(np.outer(vector, vector.conj()), basis)


def labels_of(basis: Iterable[BasisLabel]) -> Tuple[str, ...]:
    return tuple(label.display for label in basis)
