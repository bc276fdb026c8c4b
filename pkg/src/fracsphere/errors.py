"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ArgumentError(ValueError):
    """Malformed or inconsistent arguments (ordering, sizes, names)."""


class RangeError(ValueError):
    """Parameter outside a supported range."""


class ConsistencyError(RuntimeError):
    """Internal consistency check failed (e.g. broken coefficient symmetry)."""
