"""Exception types shared across modules."""


class DimensionError(ValueError):
    """Mismatched dimensions or grades."""


class PreconditionError(ValueError):
    """An operation was called outside its stated hypotheses."""


class DomainError(ValueError):
    """A point or box lies outside a manifold's parameter domain."""


class InvariantViolation(RuntimeError):
    """A guaranteed property failed; this signals a defect, not bad input."""
