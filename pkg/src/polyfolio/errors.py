"""Exception types raised across the package."""


class PolyfolioError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(PolyfolioError, ValueError):
    """An argument violates a documented precondition."""


class InvalidWeightsError(InvalidParameterError):
    """Mixture weights are negative or do not sum to one."""


class DegenerateInputError(PolyfolioError, ValueError):
    """Input is structurally degenerate (rank-deficient, constant, duplicated)."""


class DegenerateAssetError(DegenerateInputError):
    """An asset has zero variance over the estimation window."""

    def __init__(self, symbol, message=None):
        self.symbol = symbol
        super().__init__(message or f"asset {symbol!r} has zero variance")


class ConvergenceError(PolyfolioError, RuntimeError):
    """An iterative method hit its iteration cap; carries the best iterate."""

    def __init__(self, message, best_x=None, best_value=None):
        self.best_x = best_x
        self.best_value = best_value
        super().__init__(message)


class StepSizeError(PolyfolioError, RuntimeError):
    """A trajectory exceeded the reflection cap; reduce the step size."""


class NonMonotoneFrontierError(PolyfolioError, RuntimeError):
    """Volatility bisection could not bracket its target."""


class IngestionError(PolyfolioError, ValueError):
    """A CSV cell failed to parse; carries its location."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        super().__init__(message)


class InsufficientDataError(PolyfolioError, ValueError):
    """Fewer than two assets or two observations after cleaning."""


class WindowError(InvalidParameterError):
    """A rolling window is longer than the available history."""


class RegionError(PolyfolioError, ValueError):
    """A weight region is empty or an LP over it is infeasible."""


class NumericalError(PolyfolioError, RuntimeError):
    """A numerical routine (eigen/LP solver) failed."""
