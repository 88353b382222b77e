"""Simulator and benchmark for malicious paper bidding in reviewer assignment."""

__version__ = "0.1.0"
