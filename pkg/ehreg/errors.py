"""
errors.py - Exception hierarchy shared by the samplers, metrics and CLI.

Validation problems map to exit code 2, numeric failures to exit code 3.
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class EHRegError(Exception):
    """Base class for all package errors."""


# --- Validation / usage ---
class ValidationError(EHRegError, ValueError):
    """Invalid inputs. Carries every violation found, not just the first."""

    def __init__(self, message, violations=None):
        self.violations = list(violations) if violations else [message]
        super().__init__(message)


class DomainError(ValidationError):
    """Argument outside the domain of a density, quantile or sampler."""


class UnsupportedParameterError(ValidationError):
    """Closed form requested for parameters it does not cover."""


class UndefinedTailError(ValidationError):
    """Tail constant requested for a mixture with no heavy component (s=0)."""


class InsufficientDrawsError(ValidationError):
    """Too few retained draws for the requested summary."""


# --- Numeric ---
class NumericError(EHRegError, ArithmeticError):
    """A numerical routine failed."""


class NotPositiveDefiniteError(NumericError):
    """Cholesky factorization failed; `minor` is the 1-based leading minor that is not positive."""

    def __init__(self, minor, context=""):
        self.minor = int(minor)
        label = f" ({context})" if context else ""
        super().__init__(f"Matrix is not positive definite{label}: leading minor of order {self.minor} is not positive")


class QuadratureError(NumericError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, residual):
        self.residual = float(residual)
        super().__init__(f"{message} (residual estimate {self.residual:.3e})")


class ChainError(NumericError):
    """Numeric failure inside a Gibbs sweep, tagged with the iteration index."""

    def __init__(self, iteration, cause):
        self.iteration = int(iteration)
        self.cause = cause
        super().__init__(f"Chain failed at iteration {self.iteration}: {cause}")


def exit_code_for(error):
    """Map an exception to the CLI exit code."""
    if isinstance(error, ValidationError):
        return EXIT_VALIDATION
    if isinstance(error, NumericError):
        return EXIT_NUMERIC
    return 1
