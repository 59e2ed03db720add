"""Exception hierarchy shared by all oamtopo modules."""


class OamTopoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OamTopoError, ValueError):
    """An argument lies outside the supported domain of a function."""


class NumericError(OamTopoError, ArithmeticError):
    """A numerical procedure failed to converge or produced garbage."""


class SingularMatrixError(OamTopoError, ArithmeticError):
    """A Gram matrix is too ill-conditioned to invert.

    Parameters
    ----------
    condition : float
        Estimated 2-norm condition number of ``H^H H``.
    """

    def __init__(self, condition, message=None):
        self.condition = float(condition)
        if message is None:
            message = f"matrix is singular to working precision (cond(H^H H) ~ {self.condition:.3e})"
        super().__init__(message)


class GeometryError(OamTopoError, ValueError):
    """A topology violates its geometric constraints."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ContractError(OamTopoError, ValueError):
    """Inputs are individually valid but mutually incompatible."""


class ConfigError(OamTopoError, ValueError):
    """An experiment configuration could not be parsed or validated."""
