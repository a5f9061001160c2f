"""flowforge: shape optimization of electrochemical-cell flow fields."""

__version__ = "0.1.0"
