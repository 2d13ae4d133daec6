"""Lyra: artist-conditioned lyric line generation and its evaluation harness."""

__version__ = "0.1.0"
