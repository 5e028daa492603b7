"""Shared error types and the diagnostic record used across the package."""
from __future__ import annotations

from dataclasses import dataclass, field


class QcasmError(Exception):
    """Base class for all errors raised by this package."""


class QmathError(QcasmError):
    """Linear-algebra layer failure (bad state, family, or wire tuple)."""


class InvalidStateError(QmathError):
    pass


class InvalidFamilyError(QmathError):
    pass


class ImpossibleBranchError(QmathError):
    """Collapse requested on an outcome whose probability is below threshold."""


class UnknownNameError(QmathError):
    """Gate, family, or state name not found among builtins or the registry."""


class RegistryError(QmathError):
    """Malformed registry document."""


class ParseError(QcasmError):
    """Raised on any syntactically invalid source; carries a position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ElaborationError(QcasmError):
    """Raised when a program cannot be reduced to ground form.

    ``clause`` is set when the failure corresponds to a well-formedness
    clause (e.g. a measurement name used inside a classical expression).
    """

    def __init__(self, message: str, clause: str | None = None):
        super().__init__(message)
        self.clause = clause


class CheckError(QcasmError):
    """Raised when a program with well-formedness diagnostics is executed."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(d.message for d in self.diagnostics)
        super().__init__(f"program is not well formed: {lines}")


class LoweringError(QcasmError):
    pass


class ScheduleError(QcasmError):
    """Schedule does not match the circuit or violates prerequisites."""


class CapExceededError(QcasmError):
    """Exhaustive enumeration requested for a circuit above the size cap."""


class SimulationError(QcasmError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    """One reportable defect: severity, message, and optional location data.

    ``clause`` names the violated well-formedness rule (machine readable);
    ``path`` locates the offending subrule inside the program body.
    """

    severity: str
    message: str
    line: int | None = None
    column: int | None = None
    clause: str | None = None
    path: str | None = None

    def render(self) -> str:
        loc = f"{self.line}:{self.column}: " if self.line is not None else ""
        where = f" [at {self.path}]" if self.path else ""
        tag = f" ({self.clause})" if self.clause else ""
        return f"{loc}{self.severity}: {self.message}{tag}{where}"
