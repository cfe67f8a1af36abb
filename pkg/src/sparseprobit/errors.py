"""Exception hierarchy shared across the package."""


class SparseProbitError(Exception):
    """Base class for all package errors."""


class DomainError(SparseProbitError):
    """An argument is outside the mathematical domain of an operation."""


class ValidationError(SparseProbitError):
    """Input data failed validation.

    Carries the offending row/column indices when available.
    """

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = list(indices) if indices is not None else []


class NumericalError(SparseProbitError):
    """A numerical routine failed (e.g. a Cholesky factorization).

    ``pivot`` is the index of the offending pivot when known.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot
