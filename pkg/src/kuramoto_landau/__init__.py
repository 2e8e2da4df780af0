"""Spectral simulation and stability analysis of partially locked Kuramoto states."""
__version__ = "0.1.0"
