"""Closed-form comparison functions for the extremal operators.

``comparison_v`` is the positive, decreasing solution of
``v'' + beta v' - gamma v = 0`` with ``v(0) = 1`` and ``v'(0) = -kappa_prime``;
it vanishes at a finite ``xi`` and bounds a steep solution from above until
that solution changes sign.

``cauchy_w`` solves ``w'' + beta|w'| + gamma|w| = 0``, ``w(0) = 0``,
``w'(0) = 1`` in closed form up to its first critical point ``x_hat``.
In the oscillatory case ``x_hat = atan(2 omega / beta) / omega``, where
``w(x_hat) e^{kappa x_hat} = e^{(kappa - beta/2) x_hat} / sqrt(gamma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from ..errors import KappaPrimeNotGreater, KappaZero
from ..rates import CRITICAL, OSCILLATORY, OVERDAMPED, sharp_rate
from .trajectory import Trajectory

__all__ = [
    "ComparisonV",
    "comparison_v",
    "CauchyW",
    "cauchy_w",
    "max_ratio_at_endpoints",
]


@dataclass(frozen=True)
class ComparisonV:
    beta: float
    gamma: float
    kappa: float
    lam: float
    kappa_prime: float
    A: float
    B: float
    xi: float

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.A * np.exp(-self.kappa * x) + self.B * np.exp(self.lam * x)

    def derivative(self, x):
        x = np.asarray(x, float)
        return -self.A * self.kappa * np.exp(-self.kappa * x) + self.B * self.lam * np.exp(self.lam * x)


def comparison_v(beta, gamma, kappa_prime, xtol=1e-12) -> ComparisonV:
    """Build ``v = A e^{-kappa x} + B e^{lambda x}`` and locate its zero ``xi``."""
    rep = sharp_rate(beta, gamma)
    kappa, lam = rep.kappa, rep.lambda_pos
    if not kappa > 0:
        raise KappaZero("comparison_v needs kappa > 0")
    if not kappa_prime > kappa:
        raise KappaPrimeNotGreater(f"kappa_prime={kappa_prime} must exceed kappa={kappa}")
    # A + B = 1, -A kappa + B lambda = -kappa_prime
    B = (kappa - kappa_prime) / (kappa + lam)
    A = 1.0 - B

    def v(x):
        return A * math.exp(-kappa * x) + B * math.exp(lam * x)

    hi = 1.0 / kappa
    while v(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("could not bracket the zero of v")
    xi = bisect(v, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=2000)
    return ComparisonV(rep.beta, rep.gamma, kappa, lam, float(kappa_prime), A, B, float(xi))


@dataclass(frozen=True)
class CauchyW:
    """Solution of the upper-extremal Cauchy problem on ``[0, x_hat]``.

    ``increasing`` is set when ``w`` never reaches a critical point
    (``gamma = 0``); then ``x_hat`` is ``inf``, ``margin`` is ``inf`` and
    ``w_limit`` holds the asymptote.
    """

    beta: float
    gamma: float
    kappa: float
    omega: float
    case: str
    x_hat: float
    margin: float
    increasing: bool
    w_limit: float | None = None

    def __call__(self, x):
        x = np.asarray(x, float)
        b, om = self.beta, self.omega
        damp = np.exp(-b * x / 2.0)
        if self.case == OVERDAMPED:
            return damp * np.sinh(om * x) / om
        if self.case == CRITICAL:
            return x * damp
        return damp * np.sin(om * x) / om

    def derivative(self, x):
        x = np.asarray(x, float)
        b, om = self.beta, self.omega
        damp = np.exp(-b * x / 2.0)
        if self.case == OVERDAMPED:
            return damp * (np.cosh(om * x) - b / (2 * om) * np.sinh(om * x))
        if self.case == CRITICAL:
            return damp * (1.0 - b * x / 2.0)
        return damp * (np.cos(om * x) - b / (2 * om) * np.sin(om * x))

    def scaled_peak(self) -> float:
        """``w(x_hat) e^{kappa x_hat}``; compared against ``1/kappa``."""
        if self.increasing:
            return math.inf
        x = self.x_hat
        b, om, k = self.beta, self.omega, self.kappa
        if self.case == OVERDAMPED:
            # sinh(om x) e^{(k - b/2) x} / om, formed in log space
            return math.exp((k - b / 2 + om) * x + math.log1p(-math.exp(-2 * om * x)) - math.log(2 * om))
        if self.case == CRITICAL:
            return x * math.exp((k - b / 2) * x)
        return math.sin(om * x) * math.exp((k - b / 2) * x) / om


def cauchy_w(beta, gamma) -> CauchyW:
    """Closed form, first critical point and margin ``w(x_hat) e^{kappa x_hat} - 1/kappa``."""
    rep = sharp_rate(beta, gamma)
    b, g, k = rep.beta, rep.gamma, rep.kappa
    if k == 0:
        raise KappaZero("cauchy_w needs kappa > 0 (beta = gamma = 0)")
    case, om = rep.case, rep.omega
    if case == OVERDAMPED and g == 0:
        return CauchyW(b, g, k, om, case, math.inf, math.inf, True, w_limit=1.0 / b)
    if case == OVERDAMPED:
        # critical point: tanh(om x) = 2 om / b
        x_hat = math.atanh(2 * om / b) / om
    elif case == CRITICAL:
        x_hat = 2.0 / b
    else:
        # w' = 0 where tan(om x) = 2 om / beta; pi / (2 om) only when beta = 0
        x_hat = math.atan2(2 * om, b) / om
    w = CauchyW(b, g, k, om, case, x_hat, math.nan, False)
    margin = w.scaled_peak() - 1.0 / k
    return CauchyW(b, g, k, om, case, x_hat, margin, False)


def max_ratio_at_endpoints(u1: Trajectory, u2: Trajectory, a: float, b: float,
                           rtol: float = 1e-6, deriv_floor: float = 1e-12):
    """Check that ``max u1/u2`` over ``[a, b]`` sits at an endpoint.

    Both trajectories must share a grid.  Nodes where ``|u1'| + |u2'|``
    vanishes numerically are excluded and returned.  Returns
    ``(ok, excess, excluded)`` where ``excess`` is how far the interior
    max exceeds the endpoint max, relative to the ratio's range.
    """
    if u1.grid.shape != u2.grid.shape or not np.allclose(u1.grid, u2.grid, rtol=0, atol=1e-12):
        raise ValueError("u1 and u2 must share a grid")
    x = u1.grid
    sel = (x >= a - 1e-12) & (x <= b + 1e-12)
    if sel.sum() < 2:
        raise ValueError(f"[{a}, {b}] contains fewer than two grid points")
    if np.min(u2.u[sel]) <= 0:
        raise ValueError("u2 must be positive on [a, b]")
    ratio = u1.u[sel] / u2.u[sel]
    flat = (np.abs(u1.du[sel]) + np.abs(u2.du[sel])) <= deriv_floor
    interior = np.ones(ratio.size, bool)
    interior[[0, -1]] = False
    ends = max(ratio[0], ratio[-1])
    span = float(np.ptp(ratio)) or 1.0
    inner = ratio[interior & ~flat]
    excess = float(inner.max() - ends) / span if inner.size else -math.inf
    return excess <= rtol, excess, x[sel][flat]
