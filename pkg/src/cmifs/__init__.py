"""Feature selection by conditional mutual information with error-budget stopping."""

__version__ = "0.1.0"
