"""Tanker water supply scheduling under demand and travel-time uncertainty."""

__version__ = "0.1.0"
