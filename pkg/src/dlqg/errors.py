"""Exception hierarchy.

Input problems (bad shapes, indefinite weights, malformed files) derive from
:class:`ValidationError`; the CLI maps those to exit code 2.
"""


class DLQGError(Exception):
    pass


class ValidationError(DLQGError, ValueError):
    """Problem data failed a structural or definiteness check."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), **self.details}


class DimensionMismatch(ValidationError):
    pass


class NotSymmetric(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class NotPD(ValidationError):
    pass


class NonCausalPattern(ValidationError):
    pass


class ProblemFileError(ValidationError):
    pass


class NonCausalController(DLQGError, ValueError):
    """A gain has a nonzero entry acting on a future output."""


class WrongSubspaceKind(DLQGError, ValueError):
    pass


class NotDescent(DLQGError, ValueError):
    pass


class LineSearchStall(DLQGError, RuntimeError):
    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class NumericallyIndefinite(DLQGError, ArithmeticError):
    pass


class SubspaceEscape(DLQGError, ArithmeticError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
