"""Numerical laboratory for spin-1 Maxwell metal bands on a driven qutrit."""

__version__ = "0.1.0"
