class ThermNoiseError(Exception):
    """Base class for toolkit errors."""


class StructuralError(ThermNoiseError):
    """A required file or directory is missing or misplaced."""


class ParseError(ThermNoiseError):
    """A data file could not be parsed."""


class DataValidationError(ThermNoiseError):
    """Data parsed but violates a dataset invariant (NaN, bad label, ...)."""


class ConfigError(ThermNoiseError):
    """Invalid configuration or hyperparameters."""


class FitError(ThermNoiseError):
    """A model or preprocessing step could not be fitted."""


class CapabilityError(ThermNoiseError):
    """The requested operation is not supported by this model family."""


class UndefinedSNRError(ThermNoiseError):
    """SNR cannot be computed (zero signal or zero noise power)."""
