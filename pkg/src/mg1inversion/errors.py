"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid simulation, estimation or experiment configuration."""


class NumericError(ArithmeticError):
    """A numerical procedure produced a non-finite or unusable value."""
