"""
Error hierarchy for truncvar.

Input problems derive from ValidationError (also a ValueError); numerical failures derive from
NumericalError (also an ArithmeticError). The CLI maps both to exit code 1 and
VerificationFailure to exit code 2.
"""

from typing import List, Optional


class TruncVarError(Exception):
    """Root of all truncvar errors."""


class ValidationError(TruncVarError, ValueError):
    """Invalid user input."""


class PathValidationError(ValidationError):
    """A sampled path could not be constructed or parsed."""

    def __init__(self, message: str, line_numbers: Optional[List[int]] = None):
        super().__init__(message)
        self.line_numbers = list(line_numbers or [])


class DomainMismatchError(ValidationError):
    """Two paths do not share the same domain [a;b]."""


class ParameterDomainError(ValidationError):
    """A numeric parameter lies outside the domain of a formula."""


# Alias raised by the MGF abscissa check
DomainError = ParameterDomainError


class BallViolationError(ValidationError):
    """A competitor leaves the uniform c/2 ball around the path."""


class SizeCapError(ValidationError):
    """Brute-force enumeration requested above the configured size cap."""


class ConfigError(ValidationError):
    """Invalid Monte Carlo or command-line configuration."""


class NumericalError(TruncVarError, ArithmeticError):
    """A computation could not be completed to the requested accuracy."""


class SingularDenominatorError(NumericalError):
    """The argument is too close to a root of a denominator."""

    def __init__(self, message: str, root: float):
        super().__init__(message)
        self.root = root


class NonConvergenceError(NumericalError):
    """A series did not meet its truncation criterion within k_max terms."""

    def __init__(self, message: str, partial_sum: float, last_term: float):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.last_term = last_term


class VerificationFailure(TruncVarError):
    """The oracle verification suite found a mismatch."""

    def __init__(self, message: str, report: str = ""):
        super().__init__(message)
        self.report = report
