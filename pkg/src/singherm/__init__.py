"""Numerical toolkit for singular Hermitian metrics on trivialized vector bundles."""

__version__ = "0.1.0"
