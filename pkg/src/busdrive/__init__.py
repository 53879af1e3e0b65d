"""Joint sensor assignment and multi-line bus scheduling for drive-by sensing."""

__version__ = "0.1.0"
