"""Axisymmetric two-layer acoustic scattering via PML-truncated boundary integrals."""

__version__ = "0.1.0"
