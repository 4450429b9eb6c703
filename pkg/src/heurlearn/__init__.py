"""Learning evaluation functions for state-space search from success probabilities."""

__version__ = "0.1.0"
