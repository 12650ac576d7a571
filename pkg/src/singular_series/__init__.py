"""Truncated series solutions of linear PDEs with coefficients singular along X(t, z)."""

__version__ = "0.1.0"
