class ParameterError(ValueError):
    """An argument is outside the domain of the operation."""


class ConfigError(ValueError):
    """An experiment configuration is inconsistent."""
