"""Exception taxonomy shared by all ec3lab modules."""

from __future__ import annotations


class Ec3Error(Exception):
    """Base class for all ec3lab errors."""


class InvalidParameterError(Ec3Error):
    """An argument violates a documented precondition."""


class ParseError(Ec3Error):
    """A file does not match the expected grammar."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateInstanceError(Ec3Error):
    """An instance has zero-coupling bits; clean it before perturbation theory."""


class DegenerateNeighborError(Ec3Error):
    """A path denominator vanished: another state is degenerate with the anchor.

    `flips` identifies the offending flip set (1-based bit indices).
    """

    def __init__(self, message: str, flips: tuple[int, ...] = ()):
        self.flips = tuple(flips)
        super().__init__(message)


class DegeneratePathError(Ec3Error):
    """A proper flip subset has zero energy in the tunneling DP (disconnected input)."""


class ResourceLimitError(Ec3Error):
    """The request exceeds a documented size limit."""


class ConvergenceFailureError(Ec3Error):
    """An iterative eigensolve did not reach the requested residual."""

    def __init__(self, message: str, best_residual: float | None = None):
        self.best_residual = best_residual
        super().__init__(message)


class InapplicableError(Ec3Error):
    """The hypotheses of a proven bound do not hold for this input."""


class InternalInconsistencyError(Ec3Error):
    """Inputs that claim to be solutions produced an impossible reduction."""
