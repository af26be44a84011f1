"""
Kraus maps in operator-sum form.

A KrausMap is an ordered stack of operators K^(n) with per-branch labels, the
time interval it represents and whether it is trace preserving. Constructors
are provided for the three two-site families used by the reaction graphs:

    amplitude_damping(j, k, gamma, dim)   population k -> j with probability gamma
    dephasing(j, k, mu, dim)              coherences of site k scaled by sqrt(1 - mu)
    unitary_map(j, k, w_j, w_k, W, dt, dim)

Sites are 1-based throughout the public API. Composition follows the usual
right-to-left operator order: compose(A, B) applies B first, then A.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .densop import DensityOperator, TraceClass, new_density
from .errors import (
    BadIndices,
    BadProbability,
    BadRates,
    BranchOutOfRange,
    DimensionMismatch,
    NotTracePreserving,
)

logger = logging.getLogger(__name__)

COMPLETENESS_TOL = 1e-12
PRUNE_TOL = 1e-15
# Below this value of zeta*dt the transition probability uses its series form.
ALPHA_SERIES_CUTOFF = 5e-7

# Branch labels that mark "nothing happened" in a composed map.
_QUIET_LABELS = frozenset({"identity", "no jump", "no dephasing"})


# ---------------------------------------------------------------------------
# Site operators
# ---------------------------------------------------------------------------

def site_projector(i: int, dim: int) -> np.ndarray:
    """Q_i = |psi_i><psi_i|."""
    out = np.zeros((dim, dim), dtype=complex)
    out[i - 1, i - 1] = 1.0
    return out


def site_transition(j: int, k: int, dim: int) -> np.ndarray:
    """Q_jk = |psi_j><psi_k|."""
    out = np.zeros((dim, dim), dtype=complex)
    out[j - 1, k - 1] = 1.0
    return out


def check_indices(j: int, k: int, dim: int) -> None:
    if dim < 2:
        raise BadIndices(f"Two-site maps need dim >= 2, got: {dim!r}")
    for index in (j, k):
        if not isinstance(index, (int, np.integer)) or not 1 <= index <= dim:
            raise BadIndices(f"Expected a site in 1..{dim}, got: {index!r}")
    if j == k:
        raise BadIndices(f"Sites must differ, got j = k = {j}")


def check_probability(value: float, name: str) -> None:
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise BadProbability(f"Expected {name} in [0, 1], got: {value!r}")


# ---------------------------------------------------------------------------
# Map types
# ---------------------------------------------------------------------------

class MapFamily(enum.Enum):
    AMPLITUDE_DAMPING = "amplitude_damping"
    DEPHASING = "dephasing"
    UNITARY = "unitary"


@dataclass(frozen=True)
class MapParams:
    """Parameters of one two-site map.

    `probability` is gamma for amplitude damping and mu for dephasing; the
    frequency fields and `dt` are only read for the unitary family.
    """

    family: MapFamily
    j: int
    k: int
    probability: float = 0.0
    omega_j: float = 0.0
    omega_k: float = 0.0
    coupling: float = 0.0
    dt: float = 0.0


@dataclass(frozen=True, eq=False)
class KrausMap:
    operators: np.ndarray
    labels: Tuple[str, ...]
    duration: float
    preserving: bool

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    @property
    def n_branches(self) -> int:
        return self.operators.shape[0]

    def __repr__(self) -> str:
        return (
            f"KrausMap(dim={self.dim}, branches={list(self.labels)}, "
            f"duration={self.duration:g}, preserving={self.preserving})"
        )


def completeness_defect(kraus: KrausMap) -> float:
    """max |sum_n K^(n)+ K^(n) - 1|."""
    total = np.einsum("nji,njk->ik", kraus.operators.conj(), kraus.operators)
    return float(np.abs(total - np.eye(kraus.dim)).max())


def _new_map(
    operators: Sequence[np.ndarray],
    labels: Sequence[str],
    duration: float,
    preserving: bool,
) -> KrausMap:
    stack = np.array(operators, dtype=complex)
    if stack.ndim != 3 or stack.shape[0] < 1 or stack.shape[1] != stack.shape[2]:
        raise DimensionMismatch(f"Expected a stack of square operators, got shape {stack.shape}")
    if len(labels) != stack.shape[0]:
        raise DimensionMismatch(f"{len(labels)} labels for {stack.shape[0]} operators")
    stack.flags.writeable = False
    kraus = KrausMap(stack, tuple(labels), float(duration), preserving)
    if preserving:
        defect = completeness_defect(kraus)
        if defect > COMPLETENESS_TOL:
            raise NotTracePreserving(f"Completeness defect {defect:.3g} exceeds {COMPLETENESS_TOL:g}")
    return kraus


def identity_map(dim: int) -> KrausMap:
    return _new_map([np.eye(dim)], ["identity"], 0.0, True)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def amplitude_damping(j: int, k: int, gamma: float, dim: int, duration: float = 0.0) -> KrausMap:
    """Transfer population from site k to site j with probability gamma.

    M1 = sqrt(gamma) |j><k| records the jump; M2 = P_k + sqrt(1 - gamma) Q_k is
    the no-jump branch, where P_k = 1 - Q_k. Swapping j and k reverses the
    direction of the transfer.
    """
    check_indices(j, k, dim)
    check_probability(gamma, "gamma")
    q_k = site_projector(k, dim)
    jump = math.sqrt(gamma) * site_transition(j, k, dim)
    stay = np.eye(dim) - q_k + math.sqrt(1.0 - gamma) * q_k
    return _new_map([jump, stay], [f"jump {k}->{j}", "no jump"], duration, True)


def dephasing(j: int, k: int, mu: float, dim: int, duration: float = 0.0) -> KrausMap:
    """Scale the coherences of site k by sqrt(1 - mu); populations are untouched.

    j names the partner site of the edge and sets the direction convention; the
    operators themselves only involve Q_k.
    """
    check_indices(j, k, dim)
    check_probability(mu, "mu")
    q_k = site_projector(k, dim)
    kick = math.sqrt(mu) * q_k
    stay = np.eye(dim) - q_k + math.sqrt(1.0 - mu) * q_k
    return _new_map([kick, stay], [f"dephasing at {k}", "no dephasing"], duration, True)


def coupling_hamiltonian(j: int, k: int, omega_j: float, omega_k: float, coupling: float, dim: int) -> np.ndarray:
    """H_jk = w_j Q_j + w_k Q_k + W (Q_jk + Q_kj), with hbar = 1."""
    check_indices(j, k, dim)
    if isinstance(coupling, complex) and coupling.imag != 0:
        raise BadRates(f"Expected a real coupling, got: {coupling!r}")
    coupling = float(np.real(coupling))
    return (
        omega_j * site_projector(j, dim)
        + omega_k * site_projector(k, dim)
        + coupling * (site_transition(j, k, dim) + site_transition(k, j, dim))
    )


def unitary_map(
    j: int,
    k: int,
    omega_j: float,
    omega_k: float,
    coupling: float,
    dt: float,
    dim: int,
) -> KrausMap:
    """Single-branch map U = exp(-i H_jk dt)."""
    if not math.isfinite(dt) or dt < 0:
        raise BadRates(f"Expected a nonnegative duration, got: {dt!r}")
    hamiltonian = coupling_hamiltonian(j, k, omega_j, omega_k, coupling, dim)
    unitary = expm(-1j * hamiltonian * dt)
    return _new_map([unitary], [f"unitary {j}<->{k}"], dt, True)


def build_map(params: MapParams, dim: int) -> KrausMap:
    if params.family is MapFamily.AMPLITUDE_DAMPING:
        return amplitude_damping(params.j, params.k, params.probability, dim, params.dt)
    if params.family is MapFamily.DEPHASING:
        return dephasing(params.j, params.k, params.probability, dim, params.dt)
    return unitary_map(
        params.j, params.k, params.omega_j, params.omega_k, params.coupling, params.dt, dim
    )


def transition_probability_alpha(
    j: int,
    k: int,
    omega_j: float,
    omega_k: float,
    coupling: float,
    dt: float,
) -> float:
    """Probability of moving from site k to site j under the coupling unitary.

    alpha = (W / zeta)^2 sin^2(zeta dt) with zeta = sqrt((w_k - w_j)^2 + 4 W^2) / 2.
    For small zeta*dt the series (W dt)^2 (1 - (zeta dt)^2 / 3) is used instead,
    which also covers zeta = 0.
    """
    if j == k:
        raise BadIndices(f"Sites must differ, got j = k = {j}")
    if not math.isfinite(dt) or dt < 0:
        raise BadRates(f"Expected a nonnegative duration, got: {dt!r}")
    zeta = 0.5 * math.hypot(omega_k - omega_j, 2.0 * coupling)
    phase = zeta * dt
    if phase < ALPHA_SERIES_CUTOFF:
        alpha = (coupling * dt) ** 2 * (1.0 - phase * phase / 3.0)
    else:
        alpha = (coupling / zeta) ** 2 * math.sin(phase) ** 2
    return min(max(alpha, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------

def action(kraus: KrausMap, matrix: np.ndarray) -> np.ndarray:
    """sum_n K rho K+ on a bare matrix (states and linear probes alike)."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (kraus.dim, kraus.dim):
        raise DimensionMismatch(f"Map has dim {kraus.dim}, matrix has shape {matrix.shape}")
    ops = kraus.operators
    return np.einsum("nij,jk,nlk->il", ops, matrix, ops.conj())


def apply(kraus: KrausMap, rho: DensityOperator) -> DensityOperator:
    out = action(kraus, rho.entries)
    out = 0.5 * (out + out.conj().T)
    if kraus.preserving and rho.trace_class is TraceClass.NORMALIZED:
        trace_class = TraceClass.NORMALIZED
    else:
        trace_class = TraceClass.SUBNORMALIZED
    return new_density(out, rho.basis, trace_class)


def _branch(kraus: KrausMap, n: int) -> np.ndarray:
    if not 0 <= n < kraus.n_branches:
        raise BranchOutOfRange(f"Branch {n} outside 0..{kraus.n_branches - 1}")
    return kraus.operators[n]


def branch_probability(kraus: KrausMap, n: int, rho: DensityOperator) -> float:
    """tr[K+ K rho] for branch n."""
    op = _branch(kraus, n)
    if rho.dim != kraus.dim:
        raise DimensionMismatch(f"Map has dim {kraus.dim}, state has dim {rho.dim}")
    return float(np.trace(op.conj().T @ op @ rho.entries).real)


def conditioned_state(kraus: KrausMap, n: int, rho: DensityOperator) -> Tuple[DensityOperator, float]:
    """Unnormalized K rho K+ for branch n, together with its trace."""
    op = _branch(kraus, n)
    if rho.dim != kraus.dim:
        raise DimensionMismatch(f"Map has dim {kraus.dim}, state has dim {rho.dim}")
    out = op @ rho.entries @ op.conj().T
    out = 0.5 * (out + out.conj().T)
    state = new_density(out, rho.basis, TraceClass.SUBNORMALIZED)
    return state, float(np.trace(out).real)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def _join_labels(outer: str, inner: str) -> str:
    events = [label for label in (inner, outer) if label not in _QUIET_LABELS]
    if events:
        return ", ".join(events)
    quiet = [label for label in (inner, outer) if label != "identity"]
    return ", ".join(dict.fromkeys(quiet)) or "identity"


def compose(outer: KrausMap, inner: KrausMap) -> KrausMap:
    """The map `inner` followed by `outer`: branches are all products K_o K_i.

    Products with max-norm below 1e-15 are dropped. Both maps describe the
    same interval, so the duration is the larger of the two.
    """
    if outer.dim != inner.dim:
        raise DimensionMismatch(f"Cannot compose dim {outer.dim} with dim {inner.dim}")
    products = np.einsum("aij,bjk->abik", outer.operators, inner.operators)
    operators: List[np.ndarray] = []
    labels: List[str] = []
    for a, outer_label in enumerate(outer.labels):
        for b, inner_label in enumerate(inner.labels):
            op = products[a, b]
            if np.abs(op).max() < PRUNE_TOL:
                continue
            operators.append(op)
            labels.append(_join_labels(outer_label, inner_label))
    if not operators:
        operators.append(np.zeros((outer.dim, outer.dim), dtype=complex))
        labels.append("none")
    pruned = outer.n_branches * inner.n_branches - len(operators)
    if pruned:
        logger.debug("compose: pruned %d zero branches", pruned)
    return _new_map(
        operators,
        labels,
        max(outer.duration, inner.duration),
        outer.preserving and inner.preserving,
    )


def minimal_basis_conditionals(
    k21: float,
    k23: float,
    dt: float,
    rho: DensityOperator,
) -> List[Tuple[str, DensityOperator]]:
    """Branch-conditioned states of the lumped-products graph over one step.

    Sites are psi_1 = S, psi_2 = products, psi_3 = T. The step is
    M_23(k23 dt) M_21(k21 dt); the vanishing double-jump product is pruned, which
    leaves "jump 1->2", "jump 3->2" and "no jump".
    """
    for name, rate in (("k21", k21), ("k23", k23)):
        if not math.isfinite(rate) or rate < 0:
            raise BadRates(f"Expected {name} >= 0, got: {rate!r}")
        if rate * dt > 1.0:
            raise BadRates(f"{name}*dt = {rate * dt:g} exceeds 1")
    if not math.isfinite(dt) or dt < 0:
        raise BadRates(f"Expected dt >= 0, got: {dt!r}")
    if rho.dim != 3:
        raise DimensionMismatch(f"Expected a 3-site state, got dim {rho.dim}")
    step = compose(
        amplitude_damping(2, 3, k23 * dt, 3, dt),
        amplitude_damping(2, 1, k21 * dt, 3, dt),
    )
    out = []
    for n, label in enumerate(step.labels):
        state, _ = conditioned_state(step, n, rho)
        out.append((label, state))
    return out
