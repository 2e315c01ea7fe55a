"""Predict the process behind network traffic from per-window flow statistics."""

__version__ = "0.1.0"
