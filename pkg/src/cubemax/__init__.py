"""Numerical experiments on the weak (1,1) constant of the cubic maximal operator."""

__version__ = "0.1.0"
