"""Observer-based harmonic feedback for boost-converter dc-link ripple reduction."""

__version__ = "0.1.0"
