"""Exception hierarchy shared across the package."""


class StochemuError(Exception):
    """Base class for all errors raised by stochemu."""


class ConfigurationError(StochemuError):
    """Unsupported family, malformed config, or inconsistent options."""


class DomainError(StochemuError):
    """Evaluation point outside the support of the input model."""


class DataError(StochemuError):
    """Input data violates a precondition (too few samples, non-finite values)."""


class FitError(StochemuError):
    """A regression or optimization stage failed numerically."""


class DegenerateDataError(StochemuError):
    """Data carries no usable variance for the requested operation."""


class IntegrationError(StochemuError):
    """A time integration produced non-finite state."""


class SchemaError(StochemuError):
    """Serialized payload has the wrong schema or version."""


class StageError(StochemuError):
    """Pipeline failure wrapped with the name of the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[stage:{stage}] {message}")
        self.stage = stage
