"""Shared exception types.

Every error that callers are expected to catch (and that the CLI maps to
exit codes) lives here so the compute modules stay free of circular
imports.
"""


class LubfvmError(Exception):
    """Base class for all package-specific errors."""


class MeshError(LubfvmError):
    """Invalid mesh topology or geometry (dangling nodes, bad sets, ...)."""


class MeshParseError(MeshError):
    """Mesh text could not be parsed; carries a 1-based line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ConfigError(LubfvmError):
    """Case-configuration file is invalid; carries a line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DegenerateElementError(MeshError):
    """Element with non-positive Jacobian determinant (inverted/collapsed)."""


class ContactError(LubfvmError):
    """Film thickness reached zero or below: the surfaces touch."""


class SolverError(LubfvmError):
    """Linear or nonlinear solver breakdown (not plain non-convergence)."""


class NonConvergedError(LubfvmError):
    """Iteration cap reached without meeting the tolerance.

    Carries whatever diagnostics the solver accumulated so callers can
    inspect or log them.
    """

    def __init__(self, message: str, diagnostics=None):
        self.diagnostics = diagnostics
        super().__init__(message)
