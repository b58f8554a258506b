"""TBPTT training engine for streamable SPTMod audio-effect models."""

__version__ = "0.1.0"
