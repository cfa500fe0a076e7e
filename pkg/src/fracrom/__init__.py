"""Reduced-order models of brittle fracture in crack networks."""

__version__ = "0.1.0"
