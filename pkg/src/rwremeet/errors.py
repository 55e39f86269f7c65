"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or inconsistent configuration."""


class HorizonError(ValueError):
    """A scan ran off the end of the available path or environment.

    Attributes
    ----------
    level : int or None
        Cascade level at which the scan failed, when applicable.
    deepest : int or None
        Grid index of the deepest running minimum seen before giving up.
    """

    def __init__(self, message, level=None, deepest=None):
        super().__init__(message)
        self.level = level
        self.deepest = deepest


class FeasibilityError(RuntimeError):
    """A numerical computation exceeds its configured size or series cap."""
