"""Versioned smart-contract extraction, code metrics and technical-debt tracking."""

__version__ = "0.1.0"
