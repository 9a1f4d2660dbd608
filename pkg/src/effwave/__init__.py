"""Bloch-wave homogenization of stochastic Schrodinger equations with periodic coefficients."""

__version__ = "0.1.0"
