"""
Generators (reaction operators) d rho / dt = L rho and their propagation.

Every generator here is a finite sum of sandwich terms c * A rho B. That single
representation gives both the action on a matrix and the Liouvillian on
column-stacked vectors, vec(A rho B) = (B^T kron A) vec(rho).

Families, with 1-based sites and source projector Q_k:

    amplitude_damping_generator(j, k, rate)  rate [Q_jk rho Q_jk+ - 1/2 {Q_k, rho}]
    dephasing_generator(j, k, rate)          rate [Q_k rho Q_k - 1/2 {Q_k, rho}]
    unitary_generator(j, k, w_j, w_k, W)     -i [H_jk, rho]

Sums keep their parts, so act() on a sum is the sum of the parts' actions.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm
from tqdm import tqdm

from . import maps
from .densop import DensityOperator, TraceClass, as_matrix, new_density
from .errors import (
    BadRates,
    DimensionMismatch,
    KineticsError,
    NonConvergent,
    StepTooLarge,
)
from .timeseries import TimeSeries, from_matrices

logger = logging.getLogger(__name__)

STEP_GUARD = 0.1
SYMMETRIZE_WARN = 1e-8
TRACE_PRESERVING_TOL = 1e-12

Term = Tuple[complex, np.ndarray, np.ndarray]


class GeneratorKind(enum.Enum):
    AMPLITUDE_DAMPING = "amplitude_damping"
    DEPHASING = "dephasing"
    UNITARY = "unitary"
    SUM = "sum"
    SUPEROPERATOR = "superoperator"


# ---------------------------------------------------------------------------
# Vectorization
# ---------------------------------------------------------------------------

def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(matrix, dtype=complex).reshape(-1, order="F")


def unvec(vector: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vector).reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    matrix: np.ndarray
    vectorization: str = "column"

    @property
    def dim(self) -> int:
        return math.isqrt(self.matrix.shape[0])

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


# ---------------------------------------------------------------------------
# Generator type
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Generator:
    """A reaction operator as a sum of sandwich terms.

    `rate_scale` is the largest rate the step-size guard has to respect; it is
    zero for purely coherent generators.
    """

    dim: int
    kind: GeneratorKind
    terms: Tuple[Term, ...]
    parts: Tuple["Generator", ...] = ()
    label: str = ""
    params: Dict[str, float] = field(default_factory=dict)
    rate_scale: float = 0.0

    @cached_property
    def liouvillian(self) -> Liouvillian:
        size = self.dim * self.dim
        matrix = np.zeros((size, size), dtype=complex)
        for coeff, left, right in self.terms:
            matrix += coeff * np.kron(right.T, left)
        matrix.flags.writeable = False
        return Liouvillian(matrix)

    def __add__(self, other: "Generator") -> "Generator":
        return generator_of_composition([self, other])

    def __repr__(self) -> str:
        return f"Generator({self.label or self.kind.value}, dim={self.dim}, terms={len(self.terms)})"


def superoperator(
    terms: Sequence[Term],
    dim: int,
    label: str,
    params: Optional[Dict[str, float]] = None,
    rate_scale: float = 0.0,
) -> Generator:
    """A generator given directly by its sandwich terms."""
    checked = []
    for coeff, left, right in terms:
        left = np.asarray(left, dtype=complex)
        right = np.asarray(right, dtype=complex)
        if left.shape != (dim, dim) or right.shape != (dim, dim):
            raise DimensionMismatch(f"Term operators must be {dim}x{dim}")
        checked.append((complex(coeff), left, right))
    return Generator(dim, GeneratorKind.SUPEROPERATOR, tuple(checked), label=label,
                     params=dict(params or {}), rate_scale=rate_scale)


def zero_generator(dim: int) -> Generator:
    return Generator(dim, GeneratorKind.SUM, (), label="zero")


def _check_rate(rate: float, name: str) -> float:
    if not math.isfinite(rate) or rate < 0:
        raise BadRates(f"Expected {name} >= 0, got: {rate!r}")
    return float(rate)


def amplitude_damping_generator(j: int, k: int, rate: float, dim: int) -> Generator:
    """L_jk: population flows from site k to site j at `rate` (1/s)."""
    maps.check_indices(j, k, dim)
    rate = _check_rate(rate, "rate")
    eye = np.eye(dim, dtype=complex)
    jump = maps.site_transition(j, k, dim)
    q_k = maps.site_projector(k, dim)
    terms = ((rate, jump, jump.conj().T), (-0.5 * rate, q_k, eye), (-0.5 * rate, eye, q_k))
    return Generator(dim, GeneratorKind.AMPLITUDE_DAMPING, terms, label=f"L_{j}{k}",
                     params={"j": j, "k": k, "rate": rate}, rate_scale=rate)


def dephasing_generator(j: int, k: int, rate: float, dim: int) -> Generator:
    """S_jk: coherences of site k decay at rate/2, those between j and k included."""
    maps.check_indices(j, k, dim)
    rate = _check_rate(rate, "rate")
    eye = np.eye(dim, dtype=complex)
    q_k = maps.site_projector(k, dim)
    terms = ((rate, q_k, q_k), (-0.5 * rate, q_k, eye), (-0.5 * rate, eye, q_k))
    return Generator(dim, GeneratorKind.DEPHASING, terms, label=f"S_{j}{k}",
                     params={"j": j, "k": k, "rate": rate}, rate_scale=rate)


def unitary_generator(j: int, k: int, omega_j: float, omega_k: float, coupling: float, dim: int) -> Generator:
    """R_jk rho = -i [H_jk, rho]."""
    hamiltonian = maps.coupling_hamiltonian(j, k, omega_j, omega_k, coupling, dim)
    eye = np.eye(dim, dtype=complex)
    terms = ((-1j, hamiltonian, eye), (1j, eye, hamiltonian))
    params = {"j": j, "k": k, "omega_j": omega_j, "omega_k": omega_k, "coupling": float(np.real(coupling))}
    return Generator(dim, GeneratorKind.UNITARY, terms, label=f"R_{j}{k}", params=params)


def generator_of_composition(generators: Sequence[Generator], dim: Optional[int] = None) -> Generator:
    """Sum of generators; an empty list gives the zero generator of `dim`."""
    generators = list(generators)
    if not generators:
        if dim is None:
            raise DimensionMismatch("An empty composition needs an explicit dim")
        return zero_generator(dim)
    dims = {g.dim for g in generators}
    if len(dims) != 1 or (dim is not None and dims != {dim}):
        raise DimensionMismatch(f"Cannot sum generators of dims {sorted(dims)}")
    terms = tuple(term for g in generators for term in g.terms)
    return Generator(
        generators[0].dim,
        GeneratorKind.SUM,
        terms,
        parts=tuple(generators),
        label=" + ".join(g.label for g in generators),
        rate_scale=max(g.rate_scale for g in generators),
    )


# ---------------------------------------------------------------------------
# Action and structure
# ---------------------------------------------------------------------------

def act(g: Generator, rho: Union[DensityOperator, np.ndarray]) -> np.ndarray:
    """d rho / dt for a state or any square matrix of matching size."""
    matrix = as_matrix(rho)
    if matrix.shape != (g.dim, g.dim):
        raise DimensionMismatch(f"Generator has dim {g.dim}, matrix has shape {matrix.shape}")
    if g.kind is GeneratorKind.SUM:
        out = np.zeros_like(matrix, dtype=complex)
        for part in g.parts:
            out = out + act(part, matrix)
        return out
    out = np.zeros_like(matrix, dtype=complex)
    for coeff, left, right in g.terms:
        out += coeff * (left @ matrix @ right)
    return out


def to_liouvillian(g: Generator) -> Liouvillian:
    return g.liouvillian


def is_trace_preserving(g: Generator, tol: float = TRACE_PRESERVING_TOL) -> bool:
    """vec(1)^+ L = 0, relative to the largest Liouvillian entry."""
    matrix = g.liouvillian.matrix
    if matrix.size == 0 or not np.any(matrix):
        return True
    row = vec(np.eye(g.dim)).conj() @ matrix
    return float(np.abs(row).max()) <= tol * max(1.0, float(np.abs(matrix).max()))


def restrict(g: Generator, sites: Sequence[int], label: Optional[str] = None) -> Generator:
    """Read off the block of g on the given 1-based sites.

    Each term c A rho B becomes c (E+ A E) rho (E+ B E), E the isometry onto the
    chosen sites. Terms that only move weight out of the block lose their
    gain part, which is how the trace-decreasing minimal-basis operators arise.
    """
    sites = list(sites)
    if not sites or len(set(sites)) != len(sites) or not all(1 <= s <= g.dim for s in sites):
        raise DimensionMismatch(f"Bad site selection {sites!r} for dim {g.dim}")
    iso = np.eye(g.dim, dtype=complex)[:, [s - 1 for s in sites]]
    terms = [(c, iso.conj().T @ a @ iso, iso.conj().T @ b @ iso) for c, a, b in g.terms]
    terms = [t for t in terms if np.any(t[1]) and np.any(t[2])]
    name = label or f"{g.label}|{''.join(str(s) for s in sites)}"
    return superoperator(terms, len(sites), name, g.params, g.rate_scale)


# ---------------------------------------------------------------------------
# Maps at a finite step
# ---------------------------------------------------------------------------

def first_order_map(g: Generator, dt: float) -> maps.KrausMap:
    """The Kraus map a generator induces over one step dt.

    Damping and dephasing use gamma = rate*dt and mu = rate*dt; the unitary
    family is exponentiated exactly. Sums compose their parts right-to-left,
    so the first part acts first.
    """
    if g.kind is GeneratorKind.AMPLITUDE_DAMPING or g.kind is GeneratorKind.DEPHASING:
        probability = g.params["rate"] * dt
        if probability > 1.0:
            raise StepTooLarge(f"{g.label}: rate*dt = {probability:g} exceeds 1")
        logger.debug("%s: probability per step %.6g from rate %.6g and dt %.6g",
                     g.label, probability, g.params["rate"], dt)
        build = maps.amplitude_damping if g.kind is GeneratorKind.AMPLITUDE_DAMPING else maps.dephasing
        return build(int(g.params["j"]), int(g.params["k"]), probability, g.dim, dt)
    if g.kind is GeneratorKind.UNITARY:
        p = g.params
        return maps.unitary_map(int(p["j"]), int(p["k"]), p["omega_j"], p["omega_k"], p["coupling"], dt, g.dim)
    if g.kind is GeneratorKind.SUM:
        step = maps.identity_map(g.dim)
        for part in g.parts:
            step = maps.compose(first_order_map(part, dt), step)
        return step
    raise KineticsError(f"{g.label} has no Kraus form; propagate it exactly instead")


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

def _output_class(g: Generator, rho0: DensityOperator) -> TraceClass:
    if rho0.trace_class is TraceClass.NORMALIZED and is_trace_preserving(g):
        return TraceClass.NORMALIZED
    return TraceClass.SUBNORMALIZED


def _symmetrize(matrix: np.ndarray, where: str) -> np.ndarray:
    defect = float(np.abs(matrix - matrix.conj().T).max())
    if defect > SYMMETRIZE_WARN:
        logger.warning("%s: symmetrization removed a Hermiticity defect of %.3g", where, defect)
    else:
        logger.debug("%s: symmetrization removed %.3g", where, defect)
    return 0.5 * (matrix + matrix.conj().T)


def _evolve(g: Generator, rho0: DensityOperator, t: float) -> np.ndarray:
    if not math.isfinite(t) or t < 0:
        raise BadRates(f"Expected t >= 0, got: {t!r}")
    if rho0.dim != g.dim:
        raise DimensionMismatch(f"Generator has dim {g.dim}, state has dim {rho0.dim}")
    if t == 0:
        return np.array(rho0.entries)
    propagator = expm(g.liouvillian.matrix * t)
    out = unvec(propagator @ vec(rho0.entries), g.dim)
    if not np.all(np.isfinite(out)):
        raise NonConvergent(f"Matrix exponential produced non-finite entries at t={t:g}")
    return _symmetrize(out, f"t={t:g}")


def propagate_exact(g: Generator, rho0: DensityOperator, t: float) -> DensityOperator:
    """rho(t) with vec(rho(t)) = exp(L t) vec(rho0)."""
    if t == 0:
        return rho0
    return new_density(_evolve(g, rho0, t), rho0.basis, _output_class(g, rho0))


def propagate_exact_series(g: Generator, rho0: DensityOperator, times: Sequence[float]) -> TimeSeries:
    times = np.asarray(times, dtype=float)
    matrices = (_evolve(g, rho0, float(t)) for t in times)
    return from_matrices(times, matrices, rho0.basis, _output_class(g, rho0))


def stepwise_grid(t_final: float, dt: float) -> Tuple[int, float]:
    """Number of steps and the adjusted step that lands on t_final exactly."""
    n_steps = max(1, int(round(t_final / dt)))
    return n_steps, t_final / n_steps


def propagate_stepwise(
    builder: Union[Generator, Callable[[float], maps.KrausMap]],
    rho0: DensityOperator,
    t_final: float,
    dt: float,
    samples: Optional[int] = None,
    rate_scale: Optional[float] = None,
    step_guard: float = STEP_GUARD,
    progress: bool = False,
) -> TimeSeries:
    """Apply the one-step Kraus map round(t_final/dt) times.

    `builder` is either a generator (its first-order map is used) or a callable
    returning the map for a given step. dt is adjusted so the steps land on
    t_final exactly. Samples are taken at the step indices nearest to
    linspace(0, t_final, samples); by default every step is kept.
    """
    if not math.isfinite(dt) or dt <= 0:
        raise BadRates(f"Expected dt > 0, got: {dt!r}")
    if not math.isfinite(t_final) or t_final <= 0:
        raise BadRates(f"Expected t_final > 0, got: {t_final!r}")
    if isinstance(builder, Generator):
        generator = builder
        if rate_scale is None:
            rate_scale = generator.rate_scale
        builder = partial(first_order_map, generator)

    n_steps, step = stepwise_grid(t_final, dt)
    if abs(step - dt) > 1e-12 * dt:
        logger.info("Adjusted dt from %.6g to %.6g to reach t_final in %d steps", dt, step, n_steps)
    if rate_scale is not None and rate_scale * step > step_guard:
        raise StepTooLarge(
            f"max rate * dt = {rate_scale * step:.3g} exceeds the step guard {step_guard:g}"
        )

    kraus = builder(step)
    if kraus.dim != rho0.dim:
        raise DimensionMismatch(f"Step map has dim {kraus.dim}, state has dim {rho0.dim}")
    n_samples = n_steps + 1 if samples is None else samples
    if n_samples < 2:
        raise BadRates(f"Expected at least 2 samples, got: {n_samples!r}")
    wanted = np.unique(np.rint(np.linspace(0, n_steps, n_samples)).astype(int))
    wanted_set = set(int(i) for i in wanted)

    matrix = np.array(rho0.entries)
    recorded: List[np.ndarray] = [matrix.copy()]
    for i in tqdm(range(1, n_steps + 1), desc="Propagating", disable=not progress):
        matrix = maps.action(kraus, matrix)
        matrix = 0.5 * (matrix + matrix.conj().T)
        if i in wanted_set:
            recorded.append(matrix.copy())

    if rho0.trace_class is TraceClass.NORMALIZED and kraus.preserving:
        trace_class = TraceClass.NORMALIZED
    else:
        trace_class = TraceClass.SUBNORMALIZED
    return from_matrices(wanted * step, recorded, rho0.basis, trace_class)
