"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, data errors
exit 2, provider errors exit 3.
"""


class GraphQAError(Exception):
    """Base class for all package errors."""


class UsageError(GraphQAError):
    """Invalid parameters, flags, or configuration values."""


class DataError(GraphQAError):
    """Malformed or inconsistent input data (datasets, checkpoints, models)."""


class ProviderError(GraphQAError):
    """An embedding or generation provider failed or misbehaved."""


class StageError(GraphQAError):
    """A pipeline stage failed; wraps the original error with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
