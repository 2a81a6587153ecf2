class InputError(ValueError):
    """Bad user data or configuration."""


class FitError(RuntimeError):
    """A model could not be fitted to the supplied data."""
