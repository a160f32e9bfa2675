"""Exception hierarchy shared by all modules."""


class PeakonLabError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(PeakonLabError, ValueError):
    """Invalid numeric or configuration parameter."""


class ContractError(PeakonLabError, ValueError):
    """Inputs are individually valid but incompatible (e.g. different grids)."""


class DomainError(PeakonLabError, ValueError):
    """Parameters outside the regime in which a closed form is valid."""


class UnsupportedCaseError(PeakonLabError, NotImplementedError):
    """Parameter combination the construction deliberately does not cover."""


class NumericalError(PeakonLabError, ArithmeticError):
    """A numerical procedure failed (non-finite values, non-convergence)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
