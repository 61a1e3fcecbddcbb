"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with a profile or a pattern."""
