"""Controlled coarse homology certificates: spread tails, flow duality, profiles and spectral gaps."""

__version__ = "1.0.0"
