"""Impression allocation between guaranteed contracts and real-time bidding."""

__version__ = "0.1.0"
