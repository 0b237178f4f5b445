"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A scalar parameter or field is outside its documented domain."""


class InsufficientDataError(ValueError):
    """Not enough data to run an estimator (e.g. fewer than two distinct files)."""


class InfeasiblePlacementError(ValueError):
    """A placement violates capacity, rank-range, or shape constraints."""


class DegenerateInstanceError(ValueError):
    """An optimization instance has no users or an empty catalog."""


class InstanceTooLargeError(ValueError):
    """Exhaustive search was requested on a search space above the guard limit."""


class UnboundedProblemError(RuntimeError):
    """The LP has directions of unbounded improvement (should not occur for

    instances built by this package, where every variable is boxed)."""


class IterationLimitError(RuntimeError):
    """The simplex iteration limit was hit before reaching optimality."""


class ConfigError(ValueError):
    """A CLI/config field failed validation.  Carries the field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
