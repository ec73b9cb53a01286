"""Finite-window checks of the one-dimensional decay results.

All checks run on a truncated window.  A failed check is reported as a
*falsification candidate*: the missing behaviour may lie beyond the window.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from ..errors import (
    KappaPrimeNotGreater,
    NoBounceInWindow,
    NotNormalizable,
    PreconditionNotSteep,
    ResidualTooLarge,
)
from ..fields import CoefficientField1D, sup_ratios
from ..rates import sharp_rate
from .trajectory import DEFAULT_DX, Trajectory, solve_linear_ivp

__all__ = [
    "BounceWitness",
    "detect_bounce",
    "bounce_search",
    "Envelope",
    "envelope",
    "UCIReport",
    "verify_uci",
    "DenseGapResult",
    "dense_gap_scan",
]

STEEP_RTOL = 1e-9


@dataclass(frozen=True)
class BounceWitness:
    x_bar: float
    x_tilde: float
    h: float
    ratio: float

    def __post_init__(self):
        if not self.ratio > 0:
            raise ValueError(f"bounce ratio must be > 0, got {self.ratio}")
        if not self.x_bar < self.x_tilde < self.x_bar + self.h:
            raise ValueError(f"need x_bar < x_tilde < x_bar + h, got {self}")


def detect_bounce(traj: Trajectory, kappa: float, x_bar: float) -> BounceWitness:
    """Smallest grid ``h > 0`` with ``-u(x_bar + h)/u(x_bar) > e^{-kappa h}``.

    Requires ``u(x_bar) != 0`` and ``-u'(x_bar)/u(x_bar) > kappa`` (values
    interpolated from the trajectory).
    """
    u_bar, du_bar = traj.interpolate(x_bar)
    if u_bar == 0 or not (-du_bar / u_bar > kappa + STEEP_RTOL * max(kappa, 1.0)):
        slope = -du_bar / u_bar if u_bar else math.nan
        raise PreconditionNotSteep(
            f"at x_bar={x_bar}: u={u_bar:.3e}, -u'/u={slope:.12g} is not > kappa={kappa:.12g}")
    ahead = traj.grid > x_bar
    xs, us = traj.grid[ahead], traj.u[ahead]
    h = xs - x_bar
    ratio = -us / u_bar - np.exp(-kappa * h)
    hits = np.flatnonzero(ratio > 0)
    if hits.size == 0:
        raise NoBounceInWindow(
            f"no bounce from x_bar={x_bar} up to x={traj.x_hi} (falsification candidate "
            "or window too short)")
    k = hits[0]
    flipped = np.flatnonzero(np.sign(us[:k + 1]) != np.sign(u_bar))[0]
    lo = x_bar if flipped == 0 else xs[flipped - 1]
    hi = xs[flipped]
    if traj.interpolate(hi)[0] == 0:
        x_tilde = float(hi)
    else:
        x_tilde = brentq(lambda x: traj.interpolate(x)[0], lo, hi, xtol=1e-14)
    return BounceWitness(float(x_bar), float(x_tilde), float(h[k]), float(ratio[k]))


def bounce_search(field: CoefficientField1D, x_bar, u_bar, du_bar, kappa=None, *,
                  initial_length=None, max_length=None, tol=1e-10, dx=None):
    """Solve from ``(x_bar, u_bar, du_bar)`` and look for a bounce, doubling the
    window until ``max_length`` (default ``10/kappa``).

    Returns ``(witness, trajectory, length_used)``.
    """
    if kappa is None:
        kappa = sharp_rate(*sup_ratios(field)).kappa
    if kappa <= 0:
        raise PreconditionNotSteep("kappa = 0: the bounce statement is trivial")
    max_length = 10.0 / kappa if max_length is None else float(max_length)
    length = min(max_length, 2.0 / kappa if initial_length is None else float(initial_length))
    while True:
        x_end = min(x_bar + length, field.x_hi)
        step = dx if dx is not None else min(DEFAULT_DX, (x_end - x_bar) / 400)
        traj = solve_linear_ivp(field, x_bar, u_bar, du_bar, x_end, tol, dx=step)
        try:
            return detect_bounce(traj, kappa, x_bar), traj, x_end - x_bar
        except NoBounceInWindow:
            if length >= max_length or x_end >= field.x_hi:
                raise
            length = min(2 * length, max_length)


class Envelope(NamedTuple):
    sup_env: float
    argmax: float
    samples: np.ndarray  # shape (2, n): rows x and |u| e^{kappa x}


def envelope(traj: Trajectory, kappa: float) -> Envelope:
    """``|u(x)| e^{kappa x}`` on the trajectory grid."""
    env = np.abs(traj.u) * np.exp(kappa * traj.grid)
    i = int(np.argmax(env))
    return Envelope(float(env[i]), float(traj.grid[i]), np.vstack([traj.grid, env]))


@dataclass(frozen=True)
class UCIReport:
    kappa: float
    beta: float
    gamma: float
    x0: float
    sup_env_after_x0: float
    lower_bound: float
    passed: bool
    tol_thm: float
    tail_env: float
    tail_passed: bool
    residual: float

    def as_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def verify_uci(field: CoefficientField1D, traj: Trajectory, x0: float, *,
               tol_thm: float = 1e-2, residual_tol: float = 1e-6,
               grid_n: int = 20001, x_tail: float | None = None) -> UCIReport:
    """Finite-window check of ``max_{x >= x0} |u| e^{kappa x} >= |u(x0)| e^{kappa x0}``.

    ``passed`` uses the max over grid points in ``[x0, x_hi]`` with slack
    ``tol_thm``.  ``tail_passed`` applies the same inequality to the max over
    ``[x_tail, x_hi]`` only (default: last 20% of the trajectory), a stricter
    stand-in for the limsup.
    """
    residual = traj.residual(field)
    if residual > residual_tol:
        raise ResidualTooLarge(f"trajectory residual {residual:.3e} > {residual_tol:.3e}")
    if not traj.x_lo <= x0 < traj.x_hi:
        raise ValueError(f"x0={x0} must lie in [{traj.x_lo}, {traj.x_hi})")
    beta, gamma = sup_ratios(field, grid_n)
    kappa = sharp_rate(beta, gamma).kappa
    u0 = traj.interpolate(x0)[0]
    lower = abs(u0) * math.exp(kappa * x0)
    env = np.abs(traj.u) * np.exp(kappa * traj.grid)
    after = env[traj.grid >= x0]
    sup_after = float(after.max()) if after.size else 0.0
    if x_tail is None:
        x_tail = traj.x_hi - 0.2 * (traj.x_hi - traj.x_lo)
    tail = env[traj.grid >= max(x_tail, x0)]
    tail_env = float(tail.max()) if tail.size else 0.0
    threshold = (1 - tol_thm) * lower
    return UCIReport(kappa, beta, gamma, float(x0), sup_after, lower,
                     bool(sup_after >= threshold), tol_thm, tail_env,
                     bool(tail_env >= threshold), residual)


class DenseGapResult(NamedTuple):
    max_gap: float
    gaps: list  # (start, end) pairs
    open_tail: bool  # last gap reaches the end of the window


def dense_gap_scan(traj: Trajectory, kappa_prime: float, kappa: float | None = None) -> DenseGapResult:
    """Longest run where ``|u(x)| <= e^{-kappa_prime (x - x_lo)}`` after
    normalising ``u(x_lo) = 1``.  Zero-length runs are dropped."""
    if kappa is not None and not kappa_prime > kappa:
        raise KappaPrimeNotGreater(f"kappa_prime={kappa_prime} must exceed kappa={kappa}")
    u_lo = traj.u[0]
    if u_lo == 0:
        raise NotNormalizable("u(x_lo) = 0")
    s = traj.grid - traj.grid[0]
    below = np.abs(traj.u / u_lo) <= np.exp(-kappa_prime * s)
    edges = np.diff(np.concatenate([[0], below.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    gaps = [(float(traj.grid[a]), float(traj.grid[b])) for a, b in zip(starts, stops) if b > a]
    max_gap = max((b - a for a, b in gaps), default=0.0)
    open_tail = bool(gaps) and gaps[-1][1] == traj.x_hi
    return DenseGapResult(float(max_gap), gaps, open_tail)
