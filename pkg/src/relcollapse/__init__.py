"""Hypersurface-indexed state reduction: nonlocal measurement protocols,
GRW/CSL stochastic dynamics and a relativistic toy model."""

__version__ = "0.1.0"
