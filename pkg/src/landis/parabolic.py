"""Compactly supported parabolic barriers and lower bounds for positive supersolutions.

The barrier is ``eta(x, t) = chi(|x| - R, delta t + 1/delta + h)`` with

    chi(r, s) = (1 - r/s)^{kappa s}   for 0 <= r < s,   0 otherwise,

on ``-delta^{-2} < t < 0``.  With ``P = d/dt - L`` and the spatial
operator in radial form,

    P eta = eta_t - alpha eta_rr - (q + alpha (N-1)/|x|) eta_r - V eta,

``P eta <= 0`` holds as soon as

    -(inf alpha) eps^2 + kappa C / R + kappa delta + kappa (sup alpha) / h < 0

where ``kappa = kappa~ + eps`` and ``C = (N-1) sup alpha``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    DomainError,
    GridTooCoarse,
    InvariantViolated,
    KappaBelowThreshold,
    NormalizationCollarEmpty,
    NotPositive,
)
from .rates import DEFAULT_TAIL_FRACTION, local_rate

__all__ = [
    "SpaceTimeField",
    "chi",
    "log_chi",
    "chi_derivatives",
    "Barrier",
    "pick_parameters",
    "SubsolutionReport",
    "subsolution_grid",
    "verify_subsolution",
    "LowerBoundReport",
    "certify_lower_bound",
    "ChiLimit",
    "chi_limit_check",
]

MAX_H = 1e9
COLLAR = 1e-6


def _call(f, r, t):
    r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
    return np.broadcast_to(np.asarray(f(r, t), float), r.shape)


def _const2(c):
    c = float(c)

    def f(r, t):
        return np.full(np.broadcast(np.asarray(r), np.asarray(t)).shape, c)

    return f


@dataclass(frozen=True)
class SpaceTimeField:
    """Radial coefficients ``alpha(r, t)``, ``q(r, t)``, ``V(r, t)`` with
    ``A = alpha I`` on ``r in r_window``, ``t in [-T, 0]``.

    Bounds are sampled on a ``grid_n x grid_n`` mesh when the field is built
    with :meth:`from_callables`; constants are exact.
    """

    alpha: Callable
    drift: Callable
    potential: Callable
    n_dim: int
    r_window: tuple
    T: float
    alpha_inf: float
    alpha_sup: float
    q_sup: float
    v_sup: float
    kappa_tilde: float

    def evaluate(self, r, t):
        return _call(self.alpha, r, t), _call(self.drift, r, t), _call(self.potential, r, t)

    @property
    def C(self) -> float:
        """Geometric constant for ``A = alpha I``: ``(N - 1) sup alpha``."""
        return (self.n_dim - 1) * self.alpha_sup

    @classmethod
    def constant(cls, alpha=1.0, q=0.0, v=-1.0, n_dim=3, r_window=(0.0, math.inf), T=math.inf):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        kt = float(local_rate(alpha, q, v))
        return cls(_const2(alpha), _const2(q), _const2(v), int(n_dim), tuple(r_window), float(T),
                   float(alpha), float(alpha), abs(float(q)), abs(float(v)), kt)

    @classmethod
    def from_callables(cls, alpha, drift, potential, n_dim, r_window, T, *,
                       grid_n=401, tail_fraction=DEFAULT_TAIL_FRACTION):
        """Sampled bounds; ``kappa_tilde`` is the sup of the pointwise rate over
        the radial tail ``r >= r_hi - tail_fraction (r_hi - r_lo)``, all ``t``."""
        lo, hi = map(float, r_window)
        if not (math.isfinite(hi) and math.isfinite(T)):
            raise ValueError("sampled fields need a finite window and time extent")
        al, dr, po = (f if callable(f) else _const2(f) for f in (alpha, drift, potential))
        r, t = np.meshgrid(np.linspace(lo, hi, grid_n), np.linspace(-T, 0.0, grid_n), indexing="ij")
        a, q, v = _call(al, r, t), _call(dr, r, t), _call(po, r, t)
        if np.any(a <= 0):
            raise ValueError("alpha must be positive on the window")
        tail = r >= hi - tail_fraction * (hi - lo)
        kt = float(np.max(local_rate(a[tail], q[tail], v[tail])))
        return cls(al, dr, po, int(n_dim), (lo, hi), float(T), float(a.min()), float(a.max()),
                   float(np.abs(q).max()), float(np.abs(v).max()), kt)


def log_chi(r, s, kappa):
    """``log chi``; ``-inf`` where ``r >= s``."""
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    out = np.full(r.shape, -np.inf)
    inside = r < s
    out[inside] = kappa * s[inside] * np.log1p(-r[inside] / s[inside])
    return out if out.ndim else float(out)


def chi(r, s, kappa):
    """``(1 - r/s)^{kappa s}`` for ``r < s``, else 0."""
    return np.exp(log_chi(r, s, kappa))


def chi_derivatives(r, s, kappa):
    """``(d_r, d_rr, d_s, d_s_bound)`` of ``chi`` for ``0 <= r < s``.

    ``d_s`` is exact, ``d_s_bound = kappa chi s/(s - r)`` dominates it.
    """
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    if np.any(r >= s):
        raise DomainError("chi derivatives need r < s")
    c = chi(r, s, kappa)
    S = s / (s - r)
    d_r = -kappa * S * c
    d_rr = kappa * (kappa - 1.0 / s) * S**2 * c
    d_s = kappa * c * (np.log1p(-r / s) + r / (s - r))
    d_s_bound = kappa * c * S
    if d_r.ndim == 0:
        return float(d_r), float(d_rr), float(d_s), float(d_s_bound)
    return d_r, d_rr, d_s, d_s_bound


@dataclass(frozen=True)
class Barrier:
    kappa: float
    R: float
    h: float
    delta: float
    C: float
    eps: float
    n_dim: int = 1
    alpha_inf: float = 1.0
    alpha_sup: float = 1.0

    @property
    def t_min(self) -> float:
        return -self.delta**-2

    def s(self, t):
        return self.delta * np.asarray(t, float) + 1.0 / self.delta + self.h

    def eta(self, rho, t):
        return chi(np.asarray(rho, float) - self.R, self.s(t), self.kappa)

    def log_eta(self, rho, t):
        return log_chi(np.asarray(rho, float) - self.R, self.s(t), self.kappa)

    def admissibility(self) -> float:
        """Step-1 bound; negative means admissible."""
        k = self.kappa
        geo = k * self.C / self.R if self.C else 0.0
        return (-self.alpha_inf * self.eps**2 + geo + k * self.delta
                + k * self.alpha_sup / self.h)

    @property
    def admissible(self) -> bool:
        return self.admissibility() < 0

    @property
    def margin_fraction(self) -> float:
        """``-admissibility / (inf alpha eps^2)``."""
        return -self.admissibility() / (self.alpha_inf * self.eps**2)


def pick_parameters(field: SpaceTimeField, kappa: float, R1: float = 0.0) -> Barrier:
    """``(R, h, delta)`` leaving 10% of ``(inf alpha) eps^2`` as margin.

    The remaining 90% is split evenly between the ``C/R``, ``delta`` and
    ``1/h`` terms; ``h`` is raised to ``1/kappa`` if needed and ``R`` to just
    above ``R1``.
    """
    eps = kappa - field.kappa_tilde
    if not eps > 0:
        raise KappaBelowThreshold(f"kappa={kappa} does not exceed the threshold {field.kappa_tilde}")
    budget = 0.9 * field.alpha_inf * eps**2 / 3
    h = max(kappa * field.alpha_sup / budget, 1.0 / kappa)
    if h > MAX_H:
        raise KappaBelowThreshold(f"kappa - threshold = {eps:.3e} needs h = {h:.3e} > {MAX_H:g}")
    delta = budget / kappa
    C = field.C
    R = max(kappa * C / budget if C > 0 else 0.0, R1 * (1 + 1e-9) + 1e-12, field.r_window[0])
    return Barrier(float(kappa), float(R), float(h), float(delta), float(C), float(eps),
                   field.n_dim, field.alpha_inf, field.alpha_sup)


def _normalized_P(field, b: Barrier, xi, t):
    """``P eta / (chi S^2)`` with ``S = s/(s - r) = 1/(1 - xi)``, ``r = xi s``."""
    k = b.kappa
    s = b.s(t)
    rho = b.R + xi * s
    a, q, v = field.evaluate(rho, t)
    inv_S = 1.0 - xi
    dt = b.delta * k * (np.log1p(-xi) + xi / inv_S) * inv_S**2
    drr = k * (k - 1.0 / s)
    drift = q + a * (b.n_dim - 1) / rho
    # eta_r / (chi S^2) = -kappa / S
    return dt - a * drr + drift * k * inv_S - v * inv_S**2


def _normalized_P_fd(field, b: Barrier, xi, t, dr, dt):
    """Same quantity from central differences of ``log eta`` with steps
    ``dr`` (in ``|x|``) and ``dt``."""
    s = b.s(t)
    rho = b.R + xi * s

    def L(rr, tt):
        return b.log_eta(rr, tt)

    l0 = L(rho, t)
    lp, lm = L(rho + dr, t), L(rho - dr, t)
    l_r = (lp - lm) / (2 * dr)
    l_rr = (lp - 2 * l0 + lm) / dr**2
    l_t = (L(rho, t + dt) - L(rho, t - dt)) / (2 * dt)
    a, q, v = field.evaluate(rho, t)
    p_over_eta = l_t - a * (l_rr + l_r**2) - (q + a * (b.n_dim - 1) / rho) * l_r - v
    return p_over_eta * (1.0 - xi) ** 2


class SubsolutionReport(NamedTuple):
    max_residual: float
    passed: bool
    argmax: tuple  # (|x|, t)
    fd_discrepancy: float
    n_nodes: int
    refined: "SubsolutionReport | None" = None


def subsolution_grid(field: SpaceTimeField, barrier: Barrier, grid=(400, 400)):
    """``(rho, t, eta, residual)`` arrays of shape ``grid`` (see
    :func:`verify_subsolution` for the node layout)."""
    b = barrier
    n_r, n_t = map(int, grid)
    xi = np.linspace(0.0, 1.0 - COLLAR, n_r + 1)[1:]
    t = np.linspace(b.t_min, 0.0, n_t + 2)[1:-1]
    X, T = np.meshgrid(xi, t, indexing="ij")
    rho = b.R + X * b.s(T)
    return rho, T, b.eta(rho, T), _normalized_P(field, b, X, T)


def _evaluate(field, b, n_r, n_t, rtol, resolved):
    xi = np.linspace(0.0, 1.0 - COLLAR, n_r + 1)[1:]
    t = np.linspace(b.t_min, 0.0, n_t + 2)[1:-1]
    X, T = np.meshgrid(xi, t, indexing="ij")
    res = _normalized_P(field, b, X, T)
    i = np.unravel_index(np.argmax(res), res.shape)
    # derivative cross-check on the well-resolved part of the grid
    keep = xi <= resolved
    Xr, Tr = X[keep], T[keep]
    s = b.s(Tr)
    # stay inside the support: the backward time step shrinks s by delta * dt
    dt = np.minimum((0.0 - b.t_min) / (n_t + 1), 0.05 * s / b.delta)
    fd = _normalized_P_fd(field, b, Xr, Tr, s / n_r, dt)
    exact = res[keep]
    disc = float(np.max(np.abs(fd - exact))) if exact.size else 0.0
    bad = (np.sign(fd) != np.sign(exact)) & (np.abs(exact) > disc)
    if np.any(bad):
        raise GridTooCoarse("finite-difference and closed-form signs disagree at resolved nodes")
    max_res = float(res[i])
    rho = b.R + X[i] * b.s(T[i])
    return SubsolutionReport(max_res, bool(max_res <= rtol), (float(rho), float(T[i])), disc, res.size)


def verify_subsolution(field: SpaceTimeField, barrier: Barrier, grid=(400, 400), *,
                       rtol: float = 1e-8, refine: bool = True, resolved: float = 0.9):
    """Evaluate ``P eta`` at every node of a ``(n_r, n_t)`` space-time grid.

    Nodes are ``|x| = R + xi s(t)`` with ``xi`` uniform in ``(0, 1 - 1e-6]``
    and ``t`` uniform in ``(-delta^{-2}, 0)``.  The residual is ``P eta``
    divided by ``chi (s/(s - r))^2``, the local scale of the second
    derivative.  ``fd_discrepancy`` compares the closed form with central
    differences at grid spacing on nodes with ``xi <= resolved``.  With
    ``refine`` the check is repeated on a grid twice as fine; a pass/fail
    disagreement raises :class:`GridTooCoarse`.
    """
    b = barrier
    if b.h < 1.0 / b.kappa:
        warnings.warn(f"h={b.h:g} < 1/kappa={1 / b.kappa:g}: d_rr chi < 0 on part of the support",
                      InvariantViolated, stacklevel=2)
    n_r, n_t = map(int, grid)
    rep = _evaluate(field, b, n_r, n_t, rtol, resolved)
    if not refine:
        return rep
    fine = _evaluate(field, b, 2 * n_r, 2 * n_t, rtol, resolved)
    if fine.passed != rep.passed:
        raise GridTooCoarse(
            f"pass flag changes under refinement ({rep.max_residual:.3e} -> {fine.max_residual:.3e})")
    return rep._replace(refined=fine)


class LowerBoundReport(NamedTuple):
    passed: bool
    min_margin: float  # min of log u - log eta at t = 0 (log mode) or u - eta
    scale: float  # normalisation divisor applied to u
    log_ratio_exp: np.ndarray  # log(u(., 0) / e^{-kappa (|x| - R)})
    rho: np.ndarray


def certify_lower_bound(u_samples, rho_grid, t_grid, kappa: float, barrier: Barrier, *,
                        normalize: bool = True, log: bool = False, rtol: float = 1e-12):
    """Check ``u(x, 0) >= eta(x, 0)`` for samples ``u[t_i, rho_j]``.

    ``t_grid`` must end at ``t = 0``.  With ``normalize`` the samples are
    divided by their minimum over the collar ``R <= |x| <= R + h``, ``t < 0``.
    With ``log`` the samples are ``log u`` (for bounds that underflow).
    """
    b = barrier
    rho = np.asarray(rho_grid, float)
    t = np.asarray(t_grid, float)
    u = np.asarray(u_samples, float)
    if u.shape != (t.size, rho.size):
        raise ValueError(f"u_samples shape {u.shape} != (len(t), len(rho))")
    if t[-1] != 0.0:
        raise ValueError("t_grid must end at t = 0")
    if not math.isclose(kappa, b.kappa):
        raise ValueError("kappa does not match the barrier")
    lu = u if log else None
    if not log:
        if np.any(u <= 0):
            raise NotPositive("supersolution samples must be positive")
        lu = np.log(u)
    shift = 0.0
    if normalize:
        in_collar = (rho >= b.R) & (rho <= b.R + b.h)
        rows = t < 0
        if not (in_collar.any() and rows.any()):
            raise NormalizationCollarEmpty("no grid node in R <= |x| <= R + h, t < 0")
        shift = float(np.min(lu[np.ix_(rows, in_collar)]))
    lu0 = lu[-1] - shift
    ahead = rho >= b.R
    le = b.log_eta(rho[ahead], 0.0)
    diff = lu0[ahead] - le
    finite = np.isfinite(le)
    if log:
        margin = float(np.min(diff[finite])) if finite.any() else math.inf
        passed = margin >= -rtol
    else:
        gap = np.exp(lu0[ahead]) - np.exp(le)
        margin = float(np.min(gap))
        passed = bool(np.all(gap >= -rtol * np.maximum(1.0, np.exp(le))))
    ratio = lu0[ahead] + kappa * (rho[ahead] - b.R)
    return LowerBoundReport(bool(passed), margin, math.exp(shift) if not log else shift,
                            ratio, rho[ahead])


class ChiLimit(NamedTuple):
    deviations: np.ndarray
    decreasing: bool
    ratios: np.ndarray  # consecutive deviation ratios
    asymptotic: np.ndarray  # max_r kappa r^2 e^{-kappa r} / (2 s) per delta


def chi_limit_check(kappa: float, r_values, delta_sequence, h: float = 10.0) -> ChiLimit:
    """``max_r |chi(r, 1/delta + h) - e^{-kappa r}|`` along ``delta -> 0``.

    To first order the deviation is ``kappa r^2 e^{-kappa r} / (2 s)``.
    """
    r = np.asarray(r_values, float)
    d = np.asarray(delta_sequence, float)
    if np.any(np.diff(d) >= 0):
        raise ValueError("delta_sequence must decrease")
    dev, asym = [], []
    for delta in d:
        s = 1.0 / delta + h
        dev.append(float(np.max(np.abs(chi(r, s, kappa) - np.exp(-kappa * r)))))
        asym.append(float(np.max(kappa * r**2 * np.exp(-kappa * r) / (2 * s))))
    dev = np.array(dev)
    ratios = dev[1:] / np.where(dev[:-1] > 0, dev[:-1], 1.0)
    return ChiLimit(dev, bool(np.all(np.diff(dev) <= 0)), ratios, np.array(asym))
