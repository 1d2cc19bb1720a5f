"""Exception hierarchy shared by the numerical modules and the CLI."""


class SympdrbError(Exception):
    """Base class for all package errors."""


class DimensionError(SympdrbError, ValueError):
    pass


class SymplecticityError(SympdrbError, ValueError):
    """Raised when a matrix expected to be symplectic is not.

    The measured defect is kept on ``self.defect``.
    """

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class TangentError(SympdrbError, ValueError):
    """A matrix is not in the required tangent (or horizontal) space."""


class InitializationError(SympdrbError):
    pass


class OverapproximationError(SympdrbError):
    """The Gram matrix Z^T Z + J^T Z^T Z J is (numerically) singular."""


class DegenerateFactorError(SympdrbError):
    """A small r x r solve on low-rank factors is singular."""


class CoordinateBreakdownError(SympdrbError):
    """The Cayley coordinate chart broke down; reduce the time step."""


class StepError(SympdrbError):
    """A time step failed; ``step`` holds the step index when known."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ModelError(SympdrbError):
    pass


class ConfigError(SympdrbError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""
