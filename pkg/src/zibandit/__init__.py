"""Zero-inflated bandits."""
__version__ = "0.1.0"
