"""
Scenario configuration files.

A scenario is a JSON document with a fixed schema (schema_version 1). Unknown
keys are errors, and parse_config() reports every violation it finds, each
with its path, in one SchemaError. Example:

    {
      "schema_version": 1,
      "graph": {"builtin": "StandardRP"},
      "rates": {"kS": 1e6, "kT": 1e4},
      "initial": {"amplitudes": {"S": 1, "T": 1}},
      "integration": {"method": "exact", "t_final": 5e-6, "samples": 51},
      "outputs": ["timeseries", "rates-report"]
    }

Explicit graphs list their sites and edges:

    "graph": {
      "sites": ["S", "P_S", "T", "P_T"],
      "edges": [
        {"kind": "damping", "from": 1, "to": 2, "rate": "kS"},
        {"kind": "dephasing", "j": 3, "k": 1, "rate": 2.5e5},
        {"kind": "coherent", "j": 3, "k": 1, "omega_j": 0, "omega_k": 0, "coupling": "Omega"}
      ]
    }

All values are SI: rates in 1/s, frequencies in rad/s, times in s. Strings
carrying units ("1e6 /s") are rejected with a UnitError.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .densop import DensityOperator, mixture, new_density, pure_state, superposition
from .errors import ConfigSyntaxError, KineticsError, SchemaError, UnitError
from .generators import STEP_GUARD, stepwise_grid
from .network import Edge, ReactionGraph, builtin_graph, total_generator

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("exact", "stepwise")
OUTPUTS = ("timeseries", "rates-report", "consistency-report")
DEFAULT_SAMPLES = 101
WEIGHT_TOL = 1e-10

_TOP_KEYS = {"schema_version", "name", "graph", "rates", "initial", "integration", "outputs", "measured_rate"}
_INTEGRATION_KEYS = {"method", "t_final", "dt", "samples", "step_guard"}
_EDGE_KEYS = {
    "damping": {"kind", "from", "to", "rate"},
    "dephasing": {"kind", "j", "k", "rate"},
    "coherent": {"kind", "j", "k", "omega_j", "omega_k", "coupling"},
}
_UNIT_PATTERN = re.compile(r"^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*[^\d\s.eE+-].*$")

Violations = List[Tuple[str, str]]


@dataclass(frozen=True)
class IntegrationPlan:
    method: str
    t_final: float
    samples: int
    dt: Optional[float] = None
    step_guard: float = STEP_GUARD


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    graph: ReactionGraph
    rates: Dict[str, float]
    initial: DensityOperator
    integration: IntegrationPlan
    outputs: Tuple[str, ...] = ("timeseries",)
    measured_rate: Optional[float] = None
    raw: Dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Value checks
# ---------------------------------------------------------------------------

class _Collector:
    """Accumulates schema and unit violations while the document is walked."""

    def __init__(self) -> None:
        self.violations: Violations = []
        self.units: Violations = []

    def add(self, path: str, reason: str) -> None:
        self.violations.append((path, reason))

    def number(self, value: Any, path: str, minimum: Optional[float] = None, strict: bool = False) -> Optional[float]:
        if isinstance(value, str) and _UNIT_PATTERN.match(value):
            self.units.append((path, f"{value!r} carries a unit; give a bare SI number"))
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(path, f"expected a number, got: {value!r}")
            return None
        value = float(value)
        if not math.isfinite(value):
            self.add(path, f"expected a finite number, got: {value!r}")
            return None
        if minimum is not None and (value < minimum or (strict and value == minimum)):
            relation = ">" if strict else ">="
            self.add(path, f"expected a value {relation} {minimum:g}, got: {value!r}")
            return None
        return value

    def unknown_keys(self, mapping: Dict[str, Any], allowed: set, path: str) -> None:
        for key in sorted(set(mapping) - allowed):
            self.add(f"{path}.{key}" if path else key, "unknown key")


def _complex(value: Any) -> complex:
    if isinstance(value, bool):
        raise ValueError(f"Expected a number, got: {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, list) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"Expected a number or complex string, got: {value!r}")


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

def _parse_edge(raw: Any, path: str, out: _Collector) -> Optional[Edge]:
    if not isinstance(raw, dict):
        out.add(path, "expected an object")
        return None
    kind = raw.get("kind")
    if kind not in _EDGE_KEYS:
        out.add(f"{path}.kind", f"expected one of {sorted(_EDGE_KEYS)}, got: {kind!r}")
        return None
    out.unknown_keys(raw, _EDGE_KEYS[kind], path)
    missing = sorted(_EDGE_KEYS[kind] - set(raw))
    if missing:
        out.add(path, f"missing {', '.join(missing)}")
        return None

    def value(key: str) -> Union[float, str, None]:
        item = raw[key]
        if isinstance(item, str) and not _UNIT_PATTERN.match(item):
            return item
        return out.number(item, f"{path}.{key}")

    def site(key: str) -> Optional[int]:
        item = raw[key]
        if isinstance(item, bool) or not isinstance(item, int):
            out.add(f"{path}.{key}", f"expected a 1-based site number, got: {item!r}")
            return None
        return item

    if kind == "damping":
        parts = (site("from"), site("to"), value("rate"))
        return None if None in parts else Edge.damping(*parts)
    if kind == "dephasing":
        parts = (site("j"), site("k"), value("rate"))
        return None if None in parts else Edge.dephasing(*parts)
    parts = (site("j"), site("k"), value("omega_j"), value("omega_k"), value("coupling"))
    return None if None in parts else Edge.coherent(*parts)


def _parse_graph(raw: Any, out: _Collector) -> Optional[ReactionGraph]:
    if not isinstance(raw, dict):
        out.add("graph", "expected an object")
        return None
    if "builtin" in raw:
        out.unknown_keys(raw, {"builtin"}, "graph")
        try:
            return builtin_graph(raw["builtin"])
        except KineticsError as exc:
            out.add("graph.builtin", str(exc))
            return None
    out.unknown_keys(raw, {"sites", "edges"}, "graph")
    sites = raw.get("sites")
    if isinstance(sites, int) and not isinstance(sites, bool) and sites > 0:
        names: Tuple[Optional[str], ...] = ()
        n_sites = sites
    elif isinstance(sites, list) and sites and all(isinstance(s, str) and s for s in sites):
        names = tuple(sites)
        n_sites = len(sites)
    else:
        out.add("graph.sites", "expected a site count or a non-empty list of names")
        return None
    edges_raw = raw.get("edges", [])
    if not isinstance(edges_raw, list):
        out.add("graph.edges", "expected a list")
        return None
    edges = [_parse_edge(e, f"graph.edges[{i}]", out) for i, e in enumerate(edges_raw)]
    if any(e is None for e in edges):
        return None
    try:
        return ReactionGraph(n_sites, names, tuple(edges))
    except KineticsError as exc:
        out.add("graph", str(exc))
        return None


def _parse_rates(raw: Any, out: _Collector) -> Dict[str, float]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        out.add("rates", "expected an object of name: number")
        return {}
    rates = {}
    for name, value in raw.items():
        number = out.number(value, f"rates.{name}")
        if number is not None:
            rates[name] = number
    return rates


def _parse_initial(raw: Any, graph: ReactionGraph, out: _Collector) -> Optional[DensityOperator]:
    basis = graph.basis
    try:
        if isinstance(raw, (str, int)) and not isinstance(raw, bool):
            return pure_state(raw, basis)
        if not isinstance(raw, dict) or len(raw) != 1:
            out.add("initial", "expected a state name, {'mixture'}, {'amplitudes'} or {'matrix'}")
            return None
        kind, body = next(iter(raw.items()))
        if kind == "mixture":
            if not isinstance(body, dict) or not body:
                out.add("initial.mixture", "expected an object of label: weight")
                return None
            weights = {}
            for label, weight in body.items():
                number = out.number(weight, f"initial.mixture.{label}", minimum=0.0)
                if number is None:
                    return None
                weights[label] = number
            total = sum(weights.values())
            if abs(total - 1.0) > WEIGHT_TOL:
                out.add("initial.mixture", f"weights sum to {total:.12g}, expected 1")
                return None
            return mixture(weights, basis)
        if kind == "amplitudes":
            if not isinstance(body, dict) or not body:
                out.add("initial.amplitudes", "expected an object of label: amplitude")
                return None
            return superposition({label: _complex(a) for label, a in body.items()}, basis)
        if kind == "matrix":
            if not isinstance(body, list):
                out.add("initial.matrix", "expected a list of rows")
                return None
            matrix = [[_complex(x) for x in row] for row in body]
            return new_density(matrix, basis)
        out.add(f"initial.{kind}", "unknown key")
        return None
    except (KineticsError, ValueError, TypeError) as exc:
        out.add("initial", str(exc))
        return None


def _parse_integration(raw: Any, out: _Collector) -> Optional[IntegrationPlan]:
    if not isinstance(raw, dict):
        out.add("integration", "expected an object")
        return None
    out.unknown_keys(raw, _INTEGRATION_KEYS, "integration")
    method = raw.get("method", "exact")
    if method not in METHODS:
        out.add("integration.method", f"expected one of {list(METHODS)}, got: {method!r}")
    if "t_final" not in raw:
        out.add("integration.t_final", "missing")
        t_final = None
    else:
        t_final = out.number(raw["t_final"], "integration.t_final", minimum=0.0, strict=True)
    samples = raw.get("samples", DEFAULT_SAMPLES)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        out.add("integration.samples", f"expected an integer >= 2, got: {samples!r}")
        samples = None
    dt = None
    if "dt" in raw:
        dt = out.number(raw["dt"], "integration.dt", minimum=0.0, strict=True)
    elif method == "stepwise":
        out.add("integration.dt", "required for the stepwise method")
    step_guard = out.number(raw.get("step_guard", STEP_GUARD), "integration.step_guard", minimum=0.0, strict=True)
    if None in (t_final, samples, step_guard) or method not in METHODS:
        return None
    return IntegrationPlan(method, t_final, samples, dt, step_guard)


def parse_config(text: str, name: str = "scenario") -> ScenarioConfig:
    """Parse and validate a scenario document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigSyntaxError(f"Expected a JSON object at the top level, got: {type(raw).__name__}")

    out = _Collector()
    out.unknown_keys(raw, _TOP_KEYS, "")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        out.add("schema_version", f"expected {SCHEMA_VERSION}, got: {version!r}")
    for key in ("graph", "initial", "integration"):
        if key not in raw:
            out.add(key, "missing")

    rates = _parse_rates(raw.get("rates"), out)
    graph = _parse_graph(raw["graph"], out) if "graph" in raw else None
    integration = _parse_integration(raw["integration"], out) if "integration" in raw else None

    if graph is not None:
        missing = sorted(graph.unbound() - set(rates))
        if missing:
            out.add("rates", f"graph needs values for {', '.join(missing)}")
            graph = None
        else:
            try:
                graph = graph.bind(rates)
            except KineticsError as exc:
                out.add("rates", str(exc))
                graph = None

    initial = None
    if graph is not None and "initial" in raw:
        initial = _parse_initial(raw["initial"], graph, out)

    if graph is not None and integration is not None and integration.method == "stepwise" and integration.dt:
        scale = total_generator(graph).rate_scale
        _, step = stepwise_grid(integration.t_final, integration.dt)
        if scale * step > integration.step_guard:
            out.add(
                "integration.dt",
                f"max rate * dt = {scale * step:.3g} exceeds the step guard {integration.step_guard:g}",
            )

    outputs = raw.get("outputs", ["timeseries"])
    if not isinstance(outputs, list) or not outputs or any(o not in OUTPUTS for o in outputs):
        out.add("outputs", f"expected a non-empty list drawn from {list(OUTPUTS)}, got: {outputs!r}")
        outputs = []
    measured = None
    if "measured_rate" in raw:
        measured = out.number(raw["measured_rate"], "measured_rate", minimum=0.0)
    if "consistency-report" in outputs and "measured_rate" not in raw:
        out.add("measured_rate", "required by consistency-report")
    if any(o in ("rates-report", "consistency-report") for o in outputs):
        for key in ("kS", "kT"):
            if key not in rates:
                out.add(f"rates.{key}", "required by the rate reports")

    label = raw.get("name", name)
    if not isinstance(label, str) or not label:
        out.add("name", f"expected a non-empty string, got: {label!r}")

    if out.units:
        raise UnitError("; ".join(f"{path}: {reason}" for path, reason in out.units))
    if out.violations:
        raise SchemaError(out.violations)
    return ScenarioConfig(
        name=label,
        graph=graph,
        rates=rates,
        initial=initial,
        integration=integration,
        outputs=tuple(dict.fromkeys(outputs)),
        measured_rate=measured,
        raw=raw,
    )


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read and parse a scenario file; the file stem is the default name."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigSyntaxError(f"Cannot read config {path}: {exc}") from exc
    config = parse_config(text, name=path.stem)
    logger.info("Loaded scenario %s from %s", config.name, path)
    return config
