"""Exception hierarchy shared by every coherent_kinetics module.

All errors derive from ValueError so callers that only care about "bad input"
can keep catching ValueError, the way the dataset scripts do.
"""

from __future__ import annotations

from typing import List, Optional, Tuple


class KineticsError(ValueError):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# Density operators
# ---------------------------------------------------------------------------

class DimensionMismatch(KineticsError):
    pass


class NonHermitian(KineticsError):
    pass


class NegativeEigenvalue(KineticsError):
    pass


class TraceOutOfRange(KineticsError):
    pass


class UnknownLabel(KineticsError):
    pass


# ---------------------------------------------------------------------------
# Maps and generators
# ---------------------------------------------------------------------------

class BranchOutOfRange(KineticsError):
    pass


class BadIndices(KineticsError):
    pass


class BadProbability(KineticsError):
    pass


class NotTracePreserving(KineticsError):
    pass


class StepTooLarge(KineticsError):
    pass


class NonConvergent(KineticsError):
    pass


class BadRates(KineticsError):
    pass


# ---------------------------------------------------------------------------
# Graphs and the reaction-operator catalogue
# ---------------------------------------------------------------------------

class UnknownName(KineticsError):
    pass


class InvalidGraph(KineticsError):
    pass


class UnboundParameter(KineticsError):
    pass


class NotExponentialCoherenceDecay(KineticsError):
    pass


# ---------------------------------------------------------------------------
# Configuration and runs
# ---------------------------------------------------------------------------

class ConfigSyntaxError(KineticsError):
    pass


class UnitError(KineticsError):
    pass


class SchemaError(KineticsError):
    """Every schema violation found in a config, each as (path, reason)."""

    def __init__(self, violations: List[Tuple[str, str]]):
        self.violations = list(violations)
        lines = [f"{path}: {reason}" for path, reason in self.violations]
        super().__init__("; ".join(lines) if lines else "invalid config")


class DiagnosticFailure(KineticsError):
    """A propagated snapshot failed the density-operator checks."""

    def __init__(self, message: str, sample_index: Optional[int] = None):
        self.sample_index = sample_index
        if sample_index is not None:
            message = f"sample {sample_index}: {message}"
        super().__init__(message)
