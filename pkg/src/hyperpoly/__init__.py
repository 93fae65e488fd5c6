"""Dynamics of the non-linear map ``P(f) = f(0) f(z+1)`` on entire functions."""

__version__ = "0.1.0"
