"""Desk-scale numerics for unique continuation at infinity.

Sharp one-dimensional decay rates, extremal comparison solutions, spherical
harmonic reduction of radial operators, generalised principal eigenvalues and
parabolic barriers for positive supersolutions.
"""
from . import errors, fields, harmonics, ode1d, parabolic, rates, spectral

__version__ = "0.1.0"

__all__ = ["errors", "fields", "rates", "ode1d", "spectral", "harmonics", "parabolic", "__version__"]
