"""Exception types.  Every error carries a stable diagnostic code."""

from __future__ import annotations


class QuantumGraphError(Exception):
    exit_status = 2

    def __init__(self, code: str, message: str, *, line: int | None = None, column: int | None = None):
        self.code = code
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(f"{code}: {message}{where}")


class StructuralError(QuantumGraphError):
    """Malformed input: bad shapes, dangling references, nonpositive lengths."""


class GraphFileError(StructuralError):
    """Parse failure in a graph description file."""


class ConversionError(QuantumGraphError):
    """A condition-form conversion that should be impossible for valid input."""


class UnsupportedSurgery(StructuralError):
    pass


class UnsupportedOracle(QuantumGraphError):
    """The variational oracle has no conforming discretization for a condition."""

    exit_status = 3


class NumericalRefusal(QuantumGraphError):
    """A numerical precondition failed: multiplicity, hypothesis violation, not an eigenvalue."""

    exit_status = 3

    def __init__(self, code: str, message: str, **details):
        super().__init__(code, message)
        self.details = details
