"""Hypercomplex numerics: quaternionic singular integrals on S^3,
hypercomplex-valued networks, Euler-discretized neural ODEs and
F-transform kernels."""

__version__ = "0.1.0"
