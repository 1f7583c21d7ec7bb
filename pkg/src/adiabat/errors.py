"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, bad type, out-of-range value)."""


class NumericalError(RuntimeError):
    """A numerical procedure could not deliver a trustworthy result."""


class UnsupportedOperationError(TypeError):
    """Operation requested on an object that cannot support it."""
