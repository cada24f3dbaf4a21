"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ValidationError (and subclasses) -> 2,
SolverError (and subclasses) -> 3.
"""


class TormaError(Exception):
    """Base class for all package errors."""


class ValidationError(TormaError):
    """Bad input: dimension mismatch, non-positive metric, malformed file/config."""


class CohomologyError(ValidationError):
    """A prescribed (1,1)-form is not ddbar-exact relative to the reference metric."""


class SolverError(TormaError):
    """An iterative solve failed (stagnation, positivity loss, inner-solver budget)."""


class PositivityError(SolverError):
    """The candidate metric left the positive cone and damping could not recover it."""

    def __init__(self, message, bad_nodes=None):
        super().__init__(message)
        self.bad_nodes = bad_nodes
