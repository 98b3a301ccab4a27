"""Statistics of the composite RIS-assisted channel with a direct path."""
__version__ = "0.1.0"
