"""Numerical laboratory for the circular (spherical-mean) Radon transform."""

__version__ = "0.1.0"
