"""Numerical toolkit for Fourier integral operators with product-structure
symbols: direction nets, cone/radial/product-dyadic partitions of unity,
kernel evaluation by oscillatory quadrature, and a verification harness
that fits dyadic decay exponents."""

__version__ = "0.1.0"

from .numerics import Grid, MultiIndex, FitResult  # noqa: F401
