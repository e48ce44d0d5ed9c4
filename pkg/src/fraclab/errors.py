"""Exception hierarchy shared by all fraclab modules."""


class FraclabError(Exception):
    """Base class for every error raised by fraclab."""


class InvalidArgumentError(FraclabError, ValueError):
    """An argument violates a documented precondition."""


class AssemblyError(FraclabError):
    """Operator assembly failed (e.g. the ellipticity floor is violated)."""


class NumericalError(FraclabError, ArithmeticError):
    """An iterative method failed to converge or a system was singular."""


class DomainError(FraclabError, ValueError):
    """A spectral function was requested outside its domain of definition."""


class InvalidStateError(FraclabError):
    """An object is not in the state the operation requires."""


class InsufficientDataError(FraclabError, ValueError):
    """Too few usable data points for a fit."""


class CacheError(FraclabError, IOError):
    """A cached decomposition is corrupt or does not match its request."""
