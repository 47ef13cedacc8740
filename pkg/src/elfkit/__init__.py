"""Engineered likelihood functions for amplitude estimation on noisy devices."""

__version__ = "0.1.0"

from .bias import Scheme  # noqa: F401
from .metrics import GaussianBelief, NoiseModel  # noqa: F401
