"""
Reaction graphs: sites as nodes, processes as typed edges.

    damping    source k -> target j at a rate (1/s); applies L_jk
    dephasing  (j, k) at a rate q (1/s); applies S_jk, which projects on site k
    coherent   j <-> k with site energies w_j, w_k and coupling W (rad/s)

Edge values may be numbers or placeholder names (kS, kT, q, omega_S, omega_T,
Omega) that are filled in with ReactionGraph.bind(). A graph becomes a total
generator (sum over edges) or a one-step Kraus map (composition over edges).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Set, Tuple, Union

from . import generators as gen
from . import maps
from .densop import Basis, site_basis
from .errors import BadRates, InvalidGraph, StepTooLarge, UnboundParameter, UnknownName

logger = logging.getLogger(__name__)

Value = Union[float, str]


class EdgeKind(enum.Enum):
    DAMPING = "damping"
    DEPHASING = "dephasing"
    COHERENT = "coherent"


_KIND_ORDER = {EdgeKind.DAMPING: 0, EdgeKind.DEPHASING: 1, EdgeKind.COHERENT: 2}


@dataclass(frozen=True)
class Edge:
    """One process between two sites.

    For damping, j is the target and k the source, matching L_jk. Use the
    classmethods rather than the raw constructor.
    """

    kind: EdgeKind
    j: int
    k: int
    rate: Value = 0.0
    omega_j: Value = 0.0
    omega_k: Value = 0.0
    coupling: Value = 0.0

    @classmethod
    def damping(cls, source: int, target: int, rate: Value) -> "Edge":
        return cls(EdgeKind.DAMPING, target, source, rate=rate)

    @classmethod
    def dephasing(cls, j: int, k: int, rate: Value) -> "Edge":
        return cls(EdgeKind.DEPHASING, j, k, rate=rate)

    @classmethod
    def coherent(cls, j: int, k: int, omega_j: Value, omega_k: Value, coupling: Value) -> "Edge":
        return cls(EdgeKind.COHERENT, j, k, omega_j=omega_j, omega_k=omega_k, coupling=coupling)

    @property
    def key(self) -> Tuple[EdgeKind, int, int]:
        if self.kind is EdgeKind.COHERENT:
            return (self.kind, min(self.j, self.k), max(self.j, self.k))
        return (self.kind, self.j, self.k)

    @property
    def values(self) -> Dict[str, Value]:
        if self.kind is EdgeKind.COHERENT:
            return {"omega_j": self.omega_j, "omega_k": self.omega_k, "coupling": self.coupling}
        return {"rate": self.rate}

    def symbols(self) -> Set[str]:
        return {v for v in self.values.values() if isinstance(v, str)}

    def bind(self, bindings: Mapping[str, float]) -> "Edge":
        changes = {
            name: float(bindings[value])
            for name, value in self.values.items()
            if isinstance(value, str) and value in bindings
        }
        return replace(self, **changes) if changes else self

    def describe(self) -> str:
        if self.kind is EdgeKind.DAMPING:
            return f"damping {self.k}->{self.j} at {self.rate}"
        if self.kind is EdgeKind.DEPHASING:
            return f"dephasing ({self.j},{self.k}) at {self.rate}"
        return f"coherent {self.j}<->{self.k} (w={self.omega_j},{self.omega_k}; W={self.coupling})"


@dataclass(frozen=True)
class ReactionGraph:
    n_sites: int
    names: Tuple[Optional[str], ...] = ()
    edges: Tuple[Edge, ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.n_sites, int) or self.n_sites < 1:
            raise InvalidGraph(f"Expected a positive number of sites, got: {self.n_sites!r}")
        if not self.names:
            object.__setattr__(self, "names", tuple(label.name for label in site_basis(self.n_sites)))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "edges", tuple(self.edges))
        validate_graph(self)

    @property
    def nodes(self) -> List[Tuple[int, Optional[str]]]:
        return [(i + 1, name) for i, name in enumerate(self.names)]

    @property
    def basis(self) -> Basis:
        return site_basis(self.n_sites, self.names)

    def unbound(self) -> Set[str]:
        out: Set[str] = set()
        for edge in self.edges:
            out |= edge.symbols()
        return out

    def bind(self, bindings: Mapping[str, float]) -> "ReactionGraph":
        """Replace placeholder names with numbers; unknown names stay symbolic."""
        return replace(self, edges=tuple(edge.bind(bindings) for edge in self.edges))


def validate_graph(graph: ReactionGraph) -> None:
    """Raise InvalidGraph listing every problem found."""
    problems: List[str] = []
    if len(graph.names) != graph.n_sites:
        problems.append(f"{len(graph.names)} names for {graph.n_sites} sites")
    given = [name for name in graph.names if name is not None]
    duplicates = sorted({name for name in given if given.count(name) > 1})
    if duplicates:
        problems.append(f"duplicate site names {duplicates!r}")

    seen: Set[Tuple[EdgeKind, int, int]] = set()
    energies: Dict[int, float] = {}
    for index, edge in enumerate(graph.edges):
        where = f"edge {index} ({edge.kind.value})"
        for site in (edge.j, edge.k):
            if not isinstance(site, int) or not 1 <= site <= graph.n_sites:
                problems.append(f"{where}: site {site!r} outside 1..{graph.n_sites}")
        if edge.j == edge.k:
            problems.append(f"{where}: endpoints must differ")
        if edge.key in seen:
            problems.append(f"{where}: duplicate of an earlier edge")
        seen.add(edge.key)
        for name, value in edge.values.items():
            if isinstance(value, str):
                continue
            if not math.isfinite(value):
                problems.append(f"{where}: {name} is not finite")
            elif name == "rate" and value < 0:
                problems.append(f"{where}: rate {value!r} is negative")
        if edge.kind is EdgeKind.COHERENT:
            for site, omega in ((edge.j, edge.omega_j), (edge.k, edge.omega_k)):
                if isinstance(omega, str):
                    continue
                if site in energies and energies[site] != omega:
                    problems.append(
                        f"{where}: site {site} has energy {omega!r} here and {energies[site]!r} "
                        "in another coherent edge; give each site a single energy"
                    )
                energies.setdefault(site, omega)
    if problems:
        raise InvalidGraph("; ".join(problems))


def _require_bound(graph: ReactionGraph) -> None:
    missing = graph.unbound()
    if missing:
        raise UnboundParameter(f"Unbound parameters: {', '.join(sorted(missing))}")


def edge_generator(edge: Edge, n_sites: int) -> gen.Generator:
    if edge.kind is EdgeKind.DAMPING:
        return gen.amplitude_damping_generator(edge.j, edge.k, edge.rate, n_sites)
    if edge.kind is EdgeKind.DEPHASING:
        return gen.dephasing_generator(edge.j, edge.k, edge.rate, n_sites)
    return gen.unitary_generator(edge.j, edge.k, edge.omega_j, edge.omega_k, edge.coupling, n_sites)


def total_generator(graph: ReactionGraph) -> gen.Generator:
    """Sum of the per-edge generators, damping then dephasing then coherent."""
    _require_bound(graph)
    if not graph.edges:
        logger.warning("Graph %s has no edges; using the zero generator", graph.label or "<unnamed>")
        return gen.zero_generator(graph.n_sites)
    ordered = sorted(graph.edges, key=lambda e: (_KIND_ORDER[e.kind], e.j, e.k))
    total = gen.generator_of_composition([edge_generator(e, graph.n_sites) for e in ordered])
    if graph.label:
        total = replace(total, label=graph.label)
    return total


def step_map(
    graph: ReactionGraph,
    dt: float,
    per_step: bool = False,
    step_guard: float = gen.STEP_GUARD,
) -> maps.KrausMap:
    """Compose the per-edge maps over one step, first declared edge acting first.

    With per_step=True the damping and dephasing values are probabilities per
    step (gamma, mu) rather than rates.
    """
    _require_bound(graph)
    if not math.isfinite(dt) or dt < 0:
        raise BadRates(f"Expected dt >= 0, got: {dt!r}")
    if dt == 0:
        return maps.identity_map(graph.n_sites)

    step = maps.identity_map(graph.n_sites)
    for edge in graph.edges:
        if edge.kind is EdgeKind.COHERENT:
            edge_map = maps.unitary_map(
                edge.j, edge.k, edge.omega_j, edge.omega_k, edge.coupling, dt, graph.n_sites
            )
        else:
            if per_step:
                probability = float(edge.rate)
                logger.info("%s: probability %.6g per step implies rate %.6g", edge.describe(),
                            probability, probability / dt)
            else:
                probability = float(edge.rate) * dt
                logger.debug("%s: probability %.6g per step", edge.describe(), probability)
            if probability > step_guard:
                raise StepTooLarge(
                    f"{edge.describe()}: probability per step {probability:.3g} exceeds the step guard {step_guard:g}"
                )
            build = maps.amplitude_damping if edge.kind is EdgeKind.DAMPING else maps.dephasing
            edge_map = build(edge.j, edge.k, probability, graph.n_sites, dt)
        step = maps.compose(edge_map, step)
    return step


# ---------------------------------------------------------------------------
# Canonical graphs
# ---------------------------------------------------------------------------

def _standard_edges() -> List[Edge]:
    return [Edge.damping(1, 2, "kS"), Edge.damping(3, 4, "kT")]


def _standard_rp() -> ReactionGraph:
    return ReactionGraph(4, ("S", "P_S", "T", "P_T"), tuple(_standard_edges()), "StandardRP")


def _lumped_products() -> ReactionGraph:
    edges = (Edge.damping(1, 2, "kS"), Edge.damping(3, 2, "kT"))
    return ReactionGraph(3, ("S", "P", "T"), edges, "LumpedProducts")


def _experiment_rp() -> ReactionGraph:
    edges = _standard_edges() + [
        Edge.coherent(3, 1, "omega_T", "omega_S", "Omega"),
        Edge.dephasing(3, 1, "q"),
    ]
    return ReactionGraph(4, ("S", "P_S", "T", "P_T"), tuple(edges), "ExperimentRP")


def _symmetric_dephasing_rp() -> ReactionGraph:
    edges = _standard_edges() + [Edge.dephasing(3, 1, "q"), Edge.dephasing(1, 3, "q")]
    return ReactionGraph(4, ("S", "P_S", "T", "P_T"), tuple(edges), "SymmetricDephasingRP")


BUILTIN_GRAPHS = {
    "StandardRP": _standard_rp,
    "LumpedProducts": _lumped_products,
    "ExperimentRP": _experiment_rp,
    "SymmetricDephasingRP": _symmetric_dephasing_rp,
}


def builtin_graph(name: str) -> ReactionGraph:
    try:
        return BUILTIN_GRAPHS[name]()
    except KeyError:
        raise UnknownName(
            f"Unknown graph {name!r}; expected one of {', '.join(BUILTIN_GRAPHS)}"
        ) from None
