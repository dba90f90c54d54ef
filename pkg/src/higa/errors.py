"""Shared exception types."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class ConfigError(ValueError):
    """A problem or geometry configuration is inconsistent."""


class AssemblyError(RuntimeError):
    """Assembly failed, e.g. a non-positive Jacobian determinant."""


class SolverError(RuntimeError):
    """The linear solver did not reach the required residual."""
