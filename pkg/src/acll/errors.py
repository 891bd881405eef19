"""Exception types raised across the package."""


class AcllError(Exception):
    pass


class InvalidSpecError(AcllError, ValueError):
    """Bad structural parameters (layer sizes, configs, generator params)."""


class ShapeError(AcllError, ValueError):
    pass


class InvalidDataError(AcllError, ValueError):
    """Empty or malformed dataset."""


class InvalidTaskError(AcllError, KeyError):
    pass


class SequencingError(AcllError, RuntimeError):
    """An operation was requested for a task that is not the newest one."""


class OwnershipViolationError(AcllError, RuntimeError):
    pass


class ConditioningError(AcllError, ArithmeticError):
    """Kernel matrix stayed non positive definite after maximum jitter."""


class InvalidMultiplierError(AcllError, ValueError):
    pass


class InvalidStateError(AcllError, RuntimeError):
    pass


class EvaluationError(AcllError, RuntimeError):
    """Wraps a failure of a user evaluate callback with the offending theta."""

    def __init__(self, theta, cause):
        self.theta = tuple(theta)
        super().__init__(f"evaluation failed at theta={self.theta}: {cause!r}")
