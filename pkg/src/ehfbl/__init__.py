"""Finite-blocklength rates and Monte Carlo checks for the AWGN
energy-harvesting channel."""

__version__ = "0.1.0"
