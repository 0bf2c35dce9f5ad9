"""Periodic homogenization cell problems and checks for anisotropic-energy counterexamples."""

__version__ = "0.1.0"
