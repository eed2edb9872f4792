"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OutOfRangeError(ValueError):
    """A query reaches beyond the data a table or word actually holds."""


class RegularityError(ArithmeticError):
    """Pressure never changes sign on the search interval."""


class TruncationError(ValueError):
    """A letter or radius needs more of the alphabet than the truncation keeps."""


class PrefixTooShort(ValueError):
    """A finite word prefix does not resolve the requested scale."""
