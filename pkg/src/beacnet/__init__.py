"""Joint emotion attribution and classification on frame-feature sequences."""

__version__ = "0.1.0"
