"""Small input-validation helpers used across the package."""
from __future__ import annotations

import math

import numpy as np

from .errors import NegativeInput


def check_nonnegative(value, name, exc=NegativeInput):
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise exc(f"{name} must be a finite nonnegative number, got {value!r}")
    return value


def check_positive(value, name, exc=ValueError):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise exc(f"{name} must be a finite positive number, got {value!r}")
    return value


def check_interval(lo, hi, name="interval"):
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError(f"{name} must satisfy lo < hi, got [{lo}, {hi}]")
    return lo, hi


def check_increasing(x, name="grid"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"{name} must be a 1D array with at least two points")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(np.diff(x) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return x
