"""Quantum discord and correlations in the transverse-field XY chain."""

__version__ = "0.1.0"
