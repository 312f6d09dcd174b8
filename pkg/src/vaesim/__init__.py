"""Time-domain rendering of dynamic virtual acoustic environments."""

__version__ = "0.1.0"
