"""Numerical laboratory for scale-free unique continuation estimates on cubes."""

__version__ = "0.1.0"
