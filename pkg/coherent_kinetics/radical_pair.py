"""
Radical-pair reaction operators and the analyses built on them.

Bases used here:

    minimal  {S, T}                       2 states, products excluded
    reduced  {N, T, S} = |0,0>, |0,1>, |1,0>   products traced out, N = "neither"
    sites    {S, P_S, T, P_T}             psi_1..psi_4 of the standard graph

The literature operators (haberkorn, kominis, jones_hore) act on the minimal
basis. The quantum-walk operator acts on the sites and reduces to the other
two, either by reading off the {S, T} block or by tracing out the products.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import generators as gen
from .densop import (
    Basis,
    DensityOperator,
    as_matrix,
    minimal_basis,
    new_density,
    reduced_basis,
    resolve,
    site_basis,
)
from .errors import (
    BadRates,
    DimensionMismatch,
    KineticsError,
    NotExponentialCoherenceDecay,
    StepTooLarge,
)
from .network import builtin_graph, total_generator

logger = logging.getLogger(__name__)

PROPORTIONALITY_TOL = 1e-10

# Reduced-basis positions.
_N, _T, _S = 0, 1, 2


@dataclass(frozen=True)
class RPRates:
    """Recombination rates (1/s), extra S-T dephasing and the coherent coupling (rad/s)."""

    kS: float
    kT: float
    q_extra: float = 0.0
    omega_S: float = 0.0
    omega_T: float = 0.0
    coupling: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kS", "kT", "q_extra"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise BadRates(f"Expected {name} >= 0, got: {value!r}")
        for name in ("omega_S", "omega_T", "coupling"):
            if not math.isfinite(getattr(self, name)):
                raise BadRates(f"Expected a finite {name}, got: {getattr(self, name)!r}")


def _proj(i: int, dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    out[i, i] = 1.0
    return out


def _ket_bra(i: int, j: int, dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    out[i, j] = 1.0
    return out


# ---------------------------------------------------------------------------
# Literature operators on {S, T}
# ---------------------------------------------------------------------------

def _haberkorn_terms(rates: RPRates) -> List[gen.Term]:
    eye = np.eye(2, dtype=complex)
    q_s, q_t = _proj(0, 2), _proj(1, 2)
    return [
        (-0.5 * rates.kS, q_s, eye),
        (-0.5 * rates.kS, eye, q_s),
        (-0.5 * rates.kT, q_t, eye),
        (-0.5 * rates.kT, eye, q_t),
    ]


def _params(rates: RPRates) -> Dict[str, float]:
    return {"kS": rates.kS, "kT": rates.kT}


def haberkorn(rates: RPRates) -> gen.Generator:
    """-kS/2 {Q_S, rho} - kT/2 {Q_T, rho}; trace decreasing."""
    return gen.superoperator(_haberkorn_terms(rates), 2, "haberkorn", _params(rates), max(rates.kS, rates.kT))


def kominis(rates: RPRates) -> gen.Generator:
    """Haberkorn plus kS Q_S rho Q_S + kT Q_T rho Q_T, which restores the trace."""
    terms = _haberkorn_terms(rates) + [
        (rates.kS, _proj(0, 2), _proj(0, 2)),
        (rates.kT, _proj(1, 2), _proj(1, 2)),
    ]
    return gen.superoperator(terms, 2, "kominis", _params(rates), max(rates.kS, rates.kT))


def jones_hore(rates: RPRates) -> gen.Generator:
    """-(kS + kT) rho + kS Q_T rho Q_T + kT Q_S rho Q_S."""
    eye = np.eye(2, dtype=complex)
    terms = [
        (-(rates.kS + rates.kT), eye, eye),
        (rates.kS, _proj(1, 2), _proj(1, 2)),
        (rates.kT, _proj(0, 2), _proj(0, 2)),
    ]
    return gen.superoperator(terms, 2, "jones_hore", _params(rates), rates.kS + rates.kT)


@dataclass(frozen=True)
class KominisPopulation:
    N: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.N) or self.N < 0:
            raise BadRates(f"Expected a nonnegative population, got: {self.N!r}")


def kominis_population_step(
    population: Union[KominisPopulation, float],
    rho: DensityOperator,
    rates: RPRates,
    dt: float,
) -> KominisPopulation:
    """N(t + dt) = N(t) [1 - p_S - p_T] with p_X = k_X tr[Q_X rho] dt."""
    n_now = population.N if isinstance(population, KominisPopulation) else float(population)
    if rho.dim != 2:
        raise DimensionMismatch(f"Expected a state on {{S, T}}, got dim {rho.dim}")
    if max(rates.kS, rates.kT) * dt > 1.0:
        raise StepTooLarge(f"max(kS, kT)*dt = {max(rates.kS, rates.kT) * dt:g} exceeds 1")
    p_s = rates.kS * float(rho.entries[0, 0].real) * dt
    p_t = rates.kT * float(rho.entries[1, 1].real) * dt
    if p_s + p_t > 1.0:
        raise StepTooLarge(f"Recombination probability {p_s + p_t:g} per step exceeds 1")
    return KominisPopulation(n_now * (1.0 - p_s - p_t))


@dataclass(frozen=True, eq=False)
class KominisTrajectory:
    times: np.ndarray
    population: np.ndarray
    states: List[DensityOperator] = field(default_factory=list)


def kominis_population_trajectory(
    rho0: DensityOperator,
    rates: RPRates,
    t_final: float,
    dt: float,
) -> KominisTrajectory:
    """Propagate rho with L_K exactly over each step while N follows its update.

    N does not feed back into rho.
    """
    if dt <= 0 or t_final <= 0:
        raise BadRates(f"Expected dt > 0 and t_final > 0, got: {dt!r}, {t_final!r}")
    generator = kominis(rates)
    n_steps = max(1, int(round(t_final / dt)))
    step = t_final / n_steps
    population = KominisPopulation(1.0)
    rho = rho0
    times, values, states = [0.0], [1.0], [rho0]
    for i in range(1, n_steps + 1):
        population = kominis_population_step(population, rho, rates, step)
        rho = gen.propagate_exact(generator, rho, step)
        times.append(i * step)
        values.append(population.N)
        states.append(rho)
    return KominisTrajectory(np.array(times), np.array(values), states)


# ---------------------------------------------------------------------------
# Quantum-walk operators
# ---------------------------------------------------------------------------

def qw_full(rates: RPRates) -> gen.Generator:
    """L_21(kS) + L_43(kT) on {S, P_S, T, P_T}."""
    parts = [
        gen.amplitude_damping_generator(2, 1, rates.kS, 4),
        gen.amplitude_damping_generator(4, 3, rates.kT, 4),
    ]
    return gen.generator_of_composition(parts)


def lumped_products(rates: RPRates) -> gen.Generator:
    """The three-site graph with both products lumped into site 2."""
    graph = builtin_graph("LumpedProducts").bind({"kS": rates.kS, "kT": rates.kT})
    return total_generator(graph)


def qw_reduced_minimal(rates: RPRates) -> gen.Generator:
    """The {S, T} block of qw_full; identical to haberkorn."""
    return gen.restrict(qw_full(rates), [1, 3], label="qw_reduced_minimal")


def qw_reduced_null(rates: RPRates) -> gen.Generator:
    """Closed, trace-preserving generator on {N, T, S}.

    Population lost from S and T reappears in N; the S-T coherence decays at
    (kS + kT)/2 and coherences with N are left alone.
    """
    n_s, n_t = _ket_bra(_N, _S, 3), _ket_bra(_N, _T, 3)
    q_s, q_t = _proj(_S, 3), _proj(_T, 3)
    cross = -0.5 * (rates.kS + rates.kT)
    terms = [
        (rates.kS, n_s, n_s.conj().T),
        (rates.kT, n_t, n_t.conj().T),
        (-rates.kS, q_s, q_s),
        (-rates.kT, q_t, q_t),
        (cross, q_s, q_t),
        (cross, q_t, q_s),
    ]
    return gen.superoperator(terms, 3, "qw_reduced_null", _params(rates), max(rates.kS, rates.kT))


def symmetric_dephasing(q: float) -> gen.Generator:
    """X_31(q) = S_13(q) + S_31(q) on the four sites."""
    parts = [gen.dephasing_generator(1, 3, q, 4), gen.dephasing_generator(3, 1, q, 4)]
    return gen.generator_of_composition(parts)


def reduced_symmetric_dephasing(q: float) -> gen.Generator:
    """-q on the S-T coherence of the reduced basis, nothing else."""
    if not math.isfinite(q) or q < 0:
        raise BadRates(f"Expected q >= 0, got: {q!r}")
    q_s, q_t = _proj(_S, 3), _proj(_T, 3)
    return gen.superoperator([(-q, q_s, q_t), (-q, q_t, q_s)], 3, "reduced_symmetric_dephasing", {"q": q}, q)


def kominis_via_dephasing(rates: RPRates) -> gen.Generator:
    """S_31(kS) + S_13(kT) read off on {S, T}.

    This only removes coherence; population loss needs haberkorn on top.
    """
    parts = [gen.dephasing_generator(3, 1, rates.kS, 4), gen.dephasing_generator(1, 3, rates.kT, 4)]
    return gen.restrict(gen.generator_of_composition(parts), [1, 3], label="kominis_via_dephasing")


def experiment_model(rates: RPRates, direction: str = "31") -> gen.Generator:
    """-i[H_31, rho] + L_21(kS) + L_43(kT) + S_31(q_extra).

    direction="13" puts the extra dephasing on S_13 instead.
    """
    if direction not in ("31", "13"):
        raise BadRates(f"Expected direction '31' or '13', got: {direction!r}")
    j, k = (3, 1) if direction == "31" else (1, 3)
    parts = [
        gen.unitary_generator(3, 1, rates.omega_T, rates.omega_S, rates.coupling, 4),
        gen.amplitude_damping_generator(2, 1, rates.kS, 4),
        gen.amplitude_damping_generator(4, 3, rates.kT, 4),
        gen.dephasing_generator(j, k, rates.q_extra, 4),
    ]
    return gen.generator_of_composition(parts)


# ---------------------------------------------------------------------------
# Partial trace over the products
# ---------------------------------------------------------------------------

# Occupation index n1*8 + n2*4 + n3*2 + n4 of the walker on psi_1..psi_4.
_FOCK_INDEX = (8, 4, 2, 1)


def partial_trace_products(matrix: Union[DensityOperator, np.ndarray]) -> np.ndarray:
    """Trace the product modes out of a 4-site matrix.

    Site k is the occupation ket with only mode k filled. The 16-dim matrix is
    traced over modes 2 and 4; the remaining (n1, n3) kets are ordered
    |0,0> = N, |0,1> = T, |1,0> = S, and |1,1> (always empty) is dropped.
    Works for states and for generator actions alike.
    """
    m = as_matrix(matrix)
    if m.shape != (4, 4):
        raise DimensionMismatch(f"Expected a 4-site matrix, got shape {m.shape}")
    fock = np.zeros((16, 16), dtype=complex)
    index = np.array(_FOCK_INDEX)
    fock[np.ix_(index, index)] = m
    modes = fock.reshape((2,) * 8)
    reduced = np.einsum("abcdebgd->aceg", modes).reshape(4, 4)
    return reduced[:3, :3]


def reduce_state(rho: DensityOperator) -> DensityOperator:
    """The radical-pair state over {N, T, S} with the products traced out."""
    return new_density(partial_trace_products(rho), reduced_basis(), rho.trace_class)


def embed_reduced(rho_r: Union[DensityOperator, np.ndarray]) -> np.ndarray:
    """Place a reduced state on the four sites: N on P_S, no radical-product coherence."""
    m = as_matrix(rho_r)
    if m.shape != (3, 3):
        raise DimensionMismatch(f"Expected a 3x3 reduced matrix, got shape {m.shape}")
    if np.abs(m[_N, [_T, _S]]).max() > 0 or np.abs(m[[_T, _S], _N]).max() > 0:
        raise KineticsError("Coherences with N have no single-walker counterpart")
    out = np.zeros((4, 4), dtype=complex)
    sites = {_S: 0, _T: 2}
    out[1, 1] = m[_N, _N]
    for a, i in sites.items():
        for b, j in sites.items():
            out[i, j] = m[a, b]
    return out


# ---------------------------------------------------------------------------
# Singlet-triplet dephasing and the catalogue
# ---------------------------------------------------------------------------

def _default_basis(dim: int) -> Basis:
    if dim == 2:
        return minimal_basis()
    if dim == 3:
        return reduced_basis()
    return site_basis(dim)


def st_dephasing_rate(
    g: gen.Generator,
    s_label: str = "S",
    t_label: str = "T",
    basis: Optional[Sequence] = None,
) -> float:
    """Decay rate of rho_ST, read off with the probe |S><T|.

    The generator must map the probe onto a multiple of itself; anything else
    means rho_ST does not decay exponentially on its own.
    """
    basis = _default_basis(g.dim) if basis is None else tuple(basis)
    i, j = resolve(s_label, basis), resolve(t_label, basis)
    probe = np.zeros((g.dim, g.dim), dtype=complex)
    probe[i, j] = 1.0
    out = gen.act(g, probe)
    rate = -float(out[i, j].real)
    leak = out.copy()
    leak[i, j] = 0.0
    spill = float(np.abs(leak).max())
    if spill > PROPORTIONALITY_TOL * max(1.0, abs(rate)):
        raise NotExponentialCoherenceDecay(
            f"{g.label}: probe |{s_label}><{t_label}| leaks {spill:.3g} into other entries"
        )
    return rate


@dataclass(frozen=True, eq=False)
class CatalogueEntry:
    name: str
    generator: gen.Generator
    basis: Basis

    @property
    def trace_behavior(self) -> str:
        return "preserving" if gen.is_trace_preserving(self.generator) else "decreasing"


def catalogue(rates: RPRates) -> "OrderedDict[str, CatalogueEntry]":
    """Every reaction operator the reports compare, in report order.

    The coherent coupling is left out so that rho_ST decays on its own.
    """
    incoherent = RPRates(rates.kS, rates.kT, rates.q_extra)
    sites = site_basis(4)
    entries = [
        CatalogueEntry("haberkorn", haberkorn(rates), minimal_basis()),
        CatalogueEntry("kominis", kominis(rates), minimal_basis()),
        CatalogueEntry("jones_hore", jones_hore(rates), minimal_basis()),
        CatalogueEntry("qw_full", qw_full(rates), sites),
        CatalogueEntry("qw_reduced_minimal", qw_reduced_minimal(rates), minimal_basis()),
        CatalogueEntry("qw_reduced_null", qw_reduced_null(rates), reduced_basis()),
        CatalogueEntry("qw_dephased", experiment_model(incoherent), sites),
        CatalogueEntry("qw_symmetric_dephasing", qw_full(rates) + symmetric_dephasing(rates.q_extra), sites),
    ]
    return OrderedDict((entry.name, entry) for entry in entries)


@dataclass(frozen=True)
class ConsistencyRow:
    operator: str
    trace_behavior: str
    predicted_rate: float
    consistent: Optional[bool]


@dataclass(frozen=True)
class ConsistencyReport:
    kS: float
    kT: float
    q_extra: float
    measured_rate: Optional[float]
    rows: Tuple[ConsistencyRow, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "operator": [r.operator for r in self.rows],
                "trace_behavior": [r.trace_behavior for r in self.rows],
                "st_dephasing_rate": [r.predicted_rate for r in self.rows],
                "consistent": [r.consistent for r in self.rows],
            }
        )

    def inconsistent(self) -> List[str]:
        return [r.operator for r in self.rows if r.consistent is False]

    def to_dict(self) -> Dict[str, object]:
        return {
            "kS": self.kS,
            "kT": self.kT,
            "q_extra": self.q_extra,
            "measured_rate": self.measured_rate,
            "operators": [
                {
                    "operator": r.operator,
                    "trace_behavior": r.trace_behavior,
                    "st_dephasing_rate": r.predicted_rate,
                    "consistent": r.consistent,
                }
                for r in self.rows
            ],
        }


def compare_catalogue(kS: float, kT: float, q_extra: float = 0.0, measured_rate: Optional[float] = None) -> ConsistencyReport:
    """Predicted S-T dephasing rate of every catalogue operator.

    With a measured rate, an operator is consistent when its prediction does
    not exceed the measurement.
    """
    if measured_rate is not None and (math.isnan(measured_rate) or measured_rate < 0):
        raise BadRates(f"Expected measured_rate >= 0, got: {measured_rate!r}")
    rates = RPRates(kS, kT, q_extra)
    rows = []
    for name, entry in catalogue(rates).items():
        predicted = st_dephasing_rate(entry.generator, basis=entry.basis)
        verdict = None if measured_rate is None else predicted <= measured_rate
        rows.append(ConsistencyRow(name, entry.trace_behavior, predicted, verdict))
    report = ConsistencyReport(kS, kT, q_extra, measured_rate, tuple(rows))
    if measured_rate is not None:
        logger.info("Measured %.6g 1/s: inconsistent operators %s", measured_rate, report.inconsistent() or "none")
    return report


def maeda_consistency_check(measured_rate: float, kS: float, kT: float, q_extra: float = 0.0) -> ConsistencyReport:
    """Which operators predict an S-T dephasing rate below the measured one."""
    return compare_catalogue(kS, kT, q_extra, measured_rate)
