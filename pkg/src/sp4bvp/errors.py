"""Exception hierarchy shared by the solver modules."""


class Sp4Error(Exception):
    """Base class for all package errors."""


class DomainError(Sp4Error, ValueError):
    """Argument outside [0, 1] or at a pole of an expression."""


class CapacityError(Sp4Error):
    """Requested derivative order exceeds the configured cap."""


class EvaluationError(Sp4Error, ArithmeticError):
    """A derivative or function value came out non-finite."""


class ParseError(Sp4Error, ValueError):
    """Malformed expression string."""


class SolverError(Sp4Error):
    """Singular or otherwise unsolvable discrete system."""


class ResolutionError(Sp4Error):
    """Chebyshev series still unresolved at the maximum degree."""


class UnsupportedInputError(Sp4Error, ValueError):
    """Layer right-hand side with a decay rate other than the layer rate."""


class OrchestrationError(Sp4Error):
    """Recursion requested a term that has not been built yet."""


class AccuracyError(Sp4Error):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class PrecisionError(Sp4Error):
    """Reference solution is not accurate enough for the requested measurement."""


class AssemblyError(Sp4Error):
    """Assembled finite element matrix is not symmetric positive definite."""


class ConfigError(Sp4Error):
    """Invalid run configuration; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
