"""Exception hierarchy shared by every module."""


class EFMSError(Exception):
    """Base class for all errors raised by efms."""


class InvalidMethodError(EFMSError, ValueError):
    pass


class ShapeError(EFMSError, ValueError):
    """The exactness conditions do not match the number of free coefficients."""


class SingularSystemError(EFMSError, ArithmeticError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class OrderUndeterminedError(EFMSError, ArithmeticError):
    pass


class InconsistencyError(EFMSError, ArithmeticError):
    pass


class DegenerateDegreeError(EFMSError, ValueError):
    pass


class OutOfRegionError(EFMSError, ValueError):
    """Requested a phase quantity at a point outside the stability region."""


class FitFailure(EFMSError, ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InsufficientDataError(FitFailure):
    pass


class SingularNormalizationError(EFMSError, ZeroDivisionError):
    pass


class ImplicitDivergenceError(EFMSError, ArithmeticError):
    pass


class SpecParseError(EFMSError, ValueError):
    pass


class ConditionWarning(UserWarning):
    """Moment system is ill-conditioned but still solvable."""
