"""Shared exception types."""


class AdmissibilityError(ValueError):
    """The weight function is incompatible with the (c, epsilon) regime."""


class ConvergenceError(RuntimeError):
    """A fixed-point iteration failed to reach its tolerance.

    Carries the last observed residual in ``residual`` and the number of
    iterations performed in ``iterations``.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(ValueError):
    """Invalid scenario or CLI configuration."""
