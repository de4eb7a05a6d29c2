"""Memorization auditing for small autoregressive language models."""

__version__ = "0.1.0"
