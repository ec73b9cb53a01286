"""Decay-rate thresholds computed from coefficient bounds.

With ``beta = sup |q|/alpha`` and ``gamma = sup |V|/alpha`` the sharp rate is
the largest root of ``X^2 - beta X - gamma``::

    kappa = beta/2 + sqrt(beta^2/4 + gamma)

The companion root ``-lambda_pos`` (``lambda_pos = kappa - beta``) is used by
the comparison functions in :mod:`landis.ode1d`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_nonnegative
from .errors import EmptyTail, NonPositiveAlpha
from .fields import CoefficientField1D, sup_ratios

__all__ = [
    "RateReport",
    "sharp_rate",
    "threshold_tail",
    "rate_report",
    "q_poly",
    "local_rate",
    "DecayRateEstimator",
    "OVERDAMPED",
    "CRITICAL",
    "OSCILLATORY",
]

OVERDAMPED = "overdamped"  # beta^2 > 4 gamma
CRITICAL = "critical"  # beta^2 = 4 gamma
OSCILLATORY = "oscillatory"  # beta^2 < 4 gamma

DEFAULT_TAIL_FRACTION = 0.2


@dataclass(frozen=True)
class RateReport:
    beta: float
    gamma: float
    kappa: float
    lambda_pos: float
    omega: float
    case: str
    kappa_limsup: float | None = None
    kappa_abg: float | None = None
    x_tail: float | None = None

    def csv_row(self) -> dict:
        return {
            "beta": self.beta, "gamma": self.gamma, "kappa": self.kappa,
            "lambda": self.lambda_pos, "case": self.case,
            "kappa_limsup": self.kappa_limsup, "kappa_abg": self.kappa_abg,
        }


def discriminant_case(beta: float, gamma: float) -> tuple[str, float]:
    """Classify ``beta^2 - 4 gamma`` and return ``(case, omega)``."""
    disc = beta * beta - 4.0 * gamma
    if abs(disc) <= 1e-12 * max(1.0, beta * beta):
        return CRITICAL, 0.0
    omega = math.sqrt(abs(disc)) / 2.0
    return (OVERDAMPED if disc > 0 else OSCILLATORY), omega


def sharp_rate(beta: float, gamma: float) -> RateReport:
    """Sharp one-dimensional rate and auxiliary quantities for ``(beta, gamma)``."""
    beta = check_nonnegative(beta, "beta")
    gamma = check_nonnegative(gamma, "gamma")
    # hypot avoids under/overflow of beta^2
    kappa = beta / 2.0 + math.hypot(beta / 2.0, math.sqrt(gamma))
    # gamma/kappa avoids the cancellation in -beta/2 + sqrt(...)
    lam = min(gamma / kappa, kappa) if kappa > 0 else 0.0
    case, omega = discriminant_case(beta, gamma)
    return RateReport(beta, gamma, kappa, lam, omega, case)


def local_rate(alpha, q, v):
    """Pointwise largest root of ``alpha X^2 - |q| X - |V|``."""
    alpha = np.asarray(alpha, float)
    b = np.abs(q) / alpha
    g = np.abs(v) / alpha
    return b / 2.0 + np.sqrt(b * b / 4.0 + g)


def _tail_bounds(field: CoefficientField1D, x_tail):
    if x_tail is None:
        x_tail = field.x_hi - DEFAULT_TAIL_FRACTION * (field.x_hi - field.x_lo)
    x_tail = float(x_tail)
    if x_tail >= field.x_hi:
        raise EmptyTail(f"x_tail={x_tail} >= x_hi={field.x_hi}")
    if x_tail < field.x_lo:
        raise ValueError(f"x_tail={x_tail} is left of the window {field.window}")
    return x_tail


def threshold_tail(field: CoefficientField1D, x_tail: float | None = None,
                   grid_n: int = 20001):
    """Tail thresholds ``(kappa_limsup, kappa_abg)`` over ``[x_tail, x_hi]``.

    ``kappa_limsup`` is the sup of the pointwise rate; ``kappa_abg`` combines
    separate sups, ``sup |q|/alpha + sqrt(sup |V|/alpha)``, and is never smaller.
    """
    x_tail = _tail_bounds(field, x_tail)
    _, a, q, v = field.sample(grid_n, x_tail, field.x_hi)
    if np.any(a <= 0):
        raise NonPositiveAlpha(f"{field.name}: sampled alpha <= 0")
    kappa_limsup = float(np.max(local_rate(a, q, v)))
    kappa_abg = float(np.max(np.abs(q) / a) + math.sqrt(np.max(np.abs(v) / a)))
    return kappa_limsup, kappa_abg


def rate_report(field: CoefficientField1D, grid_n: int = 20001,
                x_tail: float | None = None) -> RateReport:
    """Full report for a field: sampled ``(beta, gamma)`` plus tail thresholds."""
    beta, gamma = sup_ratios(field, grid_n)
    base = sharp_rate(beta, gamma)
    x_tail = _tail_bounds(field, x_tail)
    k_lim, k_abg = threshold_tail(field, x_tail, grid_n)
    return RateReport(base.beta, base.gamma, base.kappa, base.lambda_pos, base.omega,
                      base.case, k_lim, k_abg, x_tail)


def q_poly(alpha, q_abs, v_abs, X):
    """``alpha X^2 - |q| X - |V|``; its largest root is the sharp rate."""
    return alpha * X * X - q_abs * X - v_abs


class DecayRateEstimator(TransformerMixin, BaseEstimator):
    """Estimate decay thresholds from sampled coefficients.

    ``fit`` takes ``X`` of shape ``(n_samples, 3)`` holding ``(alpha, q, V)``
    at increasing abscissae (rows ordered along the half-line).  ``transform``
    returns the pointwise rate for each row.

    Parameters
    ----------
    tail_fraction : float
        Trailing fraction of the rows used for the limsup surrogates.
    """

    def __init__(self, tail_fraction=DEFAULT_TAIL_FRACTION):
        self.tail_fraction = tail_fraction

    def _validate(self, X, reset):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        if X.shape[1] != 3:
            raise ValueError(f"expected 3 columns (alpha, q, V), got {X.shape[1]}")
        if np.any(X[:, 0] <= 0):
            raise NonPositiveAlpha("alpha column must be strictly positive")
        if reset:
            self.n_features_in_ = 3
        return X

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        if not 0 < self.tail_fraction <= 1:
            raise ValueError(f"tail_fraction must be in (0, 1], got {self.tail_fraction}")
        a, q, v = X.T
        report = sharp_rate(float(np.max(np.abs(q) / a)), float(np.max(np.abs(v) / a)))
        n_tail = max(1, int(round(self.tail_fraction * X.shape[0])))
        at, qt, vt = X[-n_tail:].T
        self.beta_ = report.beta
        self.gamma_ = report.gamma
        self.kappa_ = report.kappa
        self.lambda_ = report.lambda_pos
        self.omega_ = report.omega
        self.case_ = report.case
        self.kappa_limsup_ = float(np.max(local_rate(at, qt, vt)))
        self.kappa_abg_ = float(np.max(np.abs(qt) / at) + math.sqrt(np.max(np.abs(vt) / at)))
        return self

    def transform(self, X):
        check_is_fitted(self, "kappa_")
        X = self._validate(X, reset=False)
        return local_rate(X[:, 0], X[:, 1], X[:, 2])[:, None]
