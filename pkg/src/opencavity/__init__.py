"""Open optical cavities as discrete modes coupled to continuum channels."""

__version__ = "0.1.0"
