"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or dimensions supplied by the caller."""


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class NumericalDomainError(ArithmeticError):
    """A computation left the finite floating-point domain."""


class QuadratureAccuracyError(ArithmeticError):
    """Quadrature could not reach the requested tolerance.

    ``bound`` holds the best absolute error estimate that was achieved.
    """

    def __init__(self, message: str, bound: float):
        super().__init__(message)
        self.bound = bound
