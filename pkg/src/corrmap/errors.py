"""Exception types shared across the package."""


class CorrmapError(Exception):
    """Base class for all package errors."""


class InvalidInput(CorrmapError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(CorrmapError):
    """A numerical routine could not produce a trustworthy result."""


class SingularMatrix(NumericalError):
    """A matrix that must be positive definite is singular or nearly so.

    Usually means the number of samples is too small for the data dimension,
    or the data is degenerate.
    """


class NotPSD(NumericalError):
    """A matrix that must be positive semidefinite has a negative eigenvalue."""


class DegenerateSpectrum(NumericalError):
    """Eigenvalues above one coincide, so eigenvectors are not identifiable."""
