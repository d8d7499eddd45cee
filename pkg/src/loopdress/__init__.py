"""Loop-group dressing for integrable hierarchies."""
__version__ = "0.1.0"
