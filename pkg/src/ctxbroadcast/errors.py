"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """An argument is outside the domain of the operation."""


class ShapeError(ValueError):
    """Operator dimensions do not match."""


class SizeError(ValueError):
    """A feasibility problem would exceed the configured size cap."""


class UnsupportedDimension(ValueError):
    """The operation is only defined for a specific Hilbert space dimension."""


class HermiticityWarning(UserWarning):
    """Input needed a noticeable correction to become Hermitian."""
