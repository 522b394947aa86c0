"""Exception hierarchy shared across the package."""


class PortfolioError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PortfolioError):
    """Malformed or structurally inconsistent input data.

    ``line`` carries the 1-based line number for file parse failures.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(PortfolioError):
    """Mathematically invalid request (bad confidence level, degenerate state, ...)."""


class DegenerateProblemError(DomainError):
    """The local step problem has no isolated solution.

    Covers collinear constraint gradients, a vanishing objective gradient on
    the feasible set, and extremum branches whose positivity condition fails.
    """


class InfeasibleStepError(PortfolioError):
    """The requested path rates cannot be met within the unit-cost ellipsoid (a2 >= 0)."""


class ConfigError(PortfolioError):
    """Invalid run configuration or generator specification."""
