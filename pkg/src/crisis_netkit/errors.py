"""Shared error types raised by the analytics modules."""


class SchemaError(ValueError):
    """Input stream is unusable: more than half of its records are malformed."""


class StudyWindowError(ValueError):
    """An event timestamp falls before the configured study start."""


class ConvergenceError(RuntimeError):
    """Power iteration did not converge within the iteration budget."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateDistributionError(ValueError):
    """Input values carry no usable spread (constant, or too few distinct)."""


class FlatLikelihoodError(ValueError):
    """The profile likelihood has no interior optimum to report."""


class InsufficientTailError(ValueError):
    """Too few tail values to fit a heavy-tailed model."""


class UnknownUserError(KeyError):
    """A user id was requested that the snapshot does not contain."""


class ScenarioError(ValueError):
    """A synthetic scenario configuration is invalid."""
