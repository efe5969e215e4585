"""Exception types raised by fgarch."""


class FGarchError(Exception):
    """Base class for all package errors."""


class DimensionError(FGarchError, ValueError):
    """Objects live on different grids or have incompatible shapes."""


class RankError(FGarchError, ValueError):
    """Requested number of basis functions exceeds the attainable rank."""

    def __init__(self, message: str, attainable: int | None = None):
        super().__init__(message)
        self.attainable = attainable


class ConsistencyError(FGarchError, RuntimeError):
    """An internal invariant was violated (e.g. negative volatility)."""


class ConvergenceError(FGarchError, RuntimeError):
    """No optimizer start converged."""

    def __init__(self, message: str, diagnostics: list | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class SingularityError(FGarchError, ArithmeticError):
    """The information matrix used by the sandwich covariance is singular."""


class DataError(FGarchError, ValueError):
    """Input data is invalid (nonpositive price, bad day, ...)."""


class ParseError(FGarchError, ValueError):
    """A file could not be parsed; carries the offending row and column."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        super().__init__(message)
        self.row = row
        self.column = column
