"""Disfluency detection from text and prosodic innovation features."""

__version__ = "0.1.0"
