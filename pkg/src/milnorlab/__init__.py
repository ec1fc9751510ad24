"""Numerical laboratory for tangent and normal Milnor numbers of surface germs in R^4."""

__version__ = "0.1.0"
