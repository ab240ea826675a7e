"""Exception types raised across the toolkit."""


class InvalidInputError(ValueError):
    """Arguments violate a documented precondition."""


class SingularInputError(ValueError):
    """Evaluation requested exactly on a kernel singularity."""


class OnJumpSurfaceError(ValueError):
    """Sphere-mean evaluation requested on the r = |z| jump surface."""


class SingularEvaluationError(ValueError):
    """Unsoftened evaluation at a source location."""


class OutOfDomainError(ValueError):
    """A particle or target lies outside the configured grid."""


class UnsupportedOrderError(ValueError):
    """Requested derivative order is not implemented."""


class NotPreparedError(RuntimeError):
    """A required reconstruction or history is missing."""


class InconsistentStateError(RuntimeError):
    """Two states that must share particles or times do not."""


class InsufficientHistoryError(RuntimeError):
    """History buffer does not span the requested retarded interval."""


class NonContractionError(RuntimeError):
    """A fixed-point iteration failed to contract (c below threshold)."""

    def __init__(self, message, ratio=None, iterates=None):
        super().__init__(message)
        self.ratio = ratio
        self.iterates = iterates


class InvalidBoxError(ValueError):
    """Integration box does not cover the source support."""


class ConfigError(ValueError):
    """Configuration file is malformed or violates a constraint."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
