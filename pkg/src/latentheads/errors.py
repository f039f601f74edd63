"""Exception hierarchy shared across the package."""


class LatentHeadsError(Exception):
    """Base class for everything this package raises on purpose."""


class ConfigurationError(LatentHeadsError):
    """Wiring mistake: mismatched dimensions, bad option values."""


class InvalidInputError(LatentHeadsError):
    """Caller handed data that violates an operation's preconditions."""


class UsageError(LatentHeadsError):
    """API called out of order (e.g. backward without a forward pass)."""


class NonFiniteError(LatentHeadsError):
    """A loss or gradient went NaN/inf; training must stop, not clip."""


class DataFormatError(LatentHeadsError):
    """Malformed treebank file; message carries file and line number."""


class CheckpointError(LatentHeadsError):
    """Unreadable or version-incompatible model checkpoint."""
