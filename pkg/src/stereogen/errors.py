class StereogenError(Exception):
    """Base class for all errors raised by this package."""


class InputFormatError(StereogenError, ValueError):
    pass


class NoLabels(StereogenError):
    """Raised when no label survives the vocabulary frequency filter."""


class InsufficientData(StereogenError):
    """Raised when a statistic needs more observations than were given."""


class InsufficientLabels(StereogenError):
    """Raised when clustering is asked for fewer than two labels."""
