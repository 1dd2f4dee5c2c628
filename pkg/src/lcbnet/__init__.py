"""Long-context biasing network for contextual speech recognition."""

__version__ = "0.1.0"
