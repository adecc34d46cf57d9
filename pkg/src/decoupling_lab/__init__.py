"""Numerical laboratory for l^2 decoupling on the paraboloid."""

__version__ = "0.1.0"
