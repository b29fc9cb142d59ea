"""Exception types shared across the package."""


class ModelError(ValueError):
    """Malformed model or grid structure: bad shapes, ranges, or fields."""


class ImpossibleEventError(ValueError):
    """A belief update was requested for a zero-probability (s', z) pair.

    The filter refuses to fabricate probability mass, so observing an event
    the model assigns probability zero is always an error for the caller.
    """


class IntractableError(RuntimeError):
    """Predicted work exceeds a configured cap (cross-sum or policy count)."""


class HorizonError(ValueError):
    """A policy action was requested at or beyond the final stage."""
