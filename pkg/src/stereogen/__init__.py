"""Automatic stereotype generation for multi-choice categorical features."""

from stereogen.errors import (
    InsufficientData,
    InsufficientLabels,
    NoLabels,
    StereogenError,
)

__version__ = "0.1.0"

__all__ = [
    "InsufficientData",
    "InsufficientLabels",
    "NoLabels",
    "StereogenError",
    "__version__",
]
