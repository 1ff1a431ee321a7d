"""Exception types shared across the package."""


class FlowFiError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FlowFiError):
    """An input the caller controls is malformed.

    Raised for bad array shapes or dtypes, invalid plan parameters,
    malformed campaign configs, datasets that fail validation, and
    models used before their decision threshold is set.
    """


class ModelLoadError(FlowFiError):
    """A weights file is truncated, corrupt, or not a weights file."""


class MetricUndefinedError(FlowFiError):
    """A rate has an empty denominator and no defined value."""
