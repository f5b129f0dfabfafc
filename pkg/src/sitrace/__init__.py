"""Local trace functions of shift-invariant spaces."""
__version__ = "0.1.0"
