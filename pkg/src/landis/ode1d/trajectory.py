"""Trajectories of second-order scalar ODEs and the integrators producing them.

Both solvers use an adaptive embedded Runge-Kutta pair with dense output
(``scipy.integrate.solve_ivp``) and restart at every point where the
right-hand side is not smooth: coefficient breakpoints for the linear
equation, zeros of ``u`` and ``u'`` for the extremal equations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .._validation import check_increasing, check_nonnegative, check_positive
from ..errors import IntegratorFailure, WindowExceeded
from ..fields import CoefficientField1D

__all__ = [
    "Trajectory",
    "solve_linear_ivp",
    "solve_extremal",
    "extremal_rhs",
    "DEFAULT_DX",
]

DEFAULT_DX = 0.01
_MAX_RESTARTS = 10_000


@dataclass
class Trajectory:
    """Samples ``u(x_i)``, ``u'(x_i)`` (and optionally ``u''``) on a grid.

    Values between grid points come from cubic Hermite interpolation, which
    is what the bounce detector uses for off-grid abscissae.
    """

    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = check_increasing(self.grid, "grid")
        self.u = np.asarray(self.u, dtype=float)
        self.du = np.asarray(self.du, dtype=float)
        if self.u.shape != self.grid.shape or self.du.shape != self.grid.shape:
            raise ValueError("u and du must have the same length as grid")
        if self.d2u is not None:
            self.d2u = np.asarray(self.d2u, dtype=float)
            if self.d2u.shape != self.grid.shape:
                raise ValueError("d2u must have the same length as grid")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.du))):
            raise ValueError("trajectory values must be finite")

    @classmethod
    def from_function(cls, grid, u, du, d2u=None, **meta):
        """Sample closed-form ``u``, ``u'`` (and ``u''``) on ``grid``."""
        grid = np.asarray(grid, float)
        return cls(grid, u(grid), du(grid), None if d2u is None else d2u(grid),
                   meta={"integrator": "closed_form", **meta})

    def __len__(self):
        return self.grid.size

    @property
    def x_lo(self) -> float:
        return float(self.grid[0])

    @property
    def x_hi(self) -> float:
        return float(self.grid[-1])

    @cached_property
    def _u_spline(self):
        return CubicHermiteSpline(self.grid, self.u, self.du)

    @cached_property
    def _du_spline(self):
        if self.d2u is not None:
            return CubicHermiteSpline(self.grid, self.du, self.d2u)
        return self._u_spline.derivative()

    def interpolate(self, x):
        """``(u(x), u'(x))`` by cubic Hermite interpolation."""
        x = np.asarray(x, float)
        if np.any(x < self.x_lo - 1e-12) or np.any(x > self.x_hi + 1e-12):
            raise WindowExceeded(f"x outside trajectory range [{self.x_lo}, {self.x_hi}]")
        u, du = self._u_spline(x), self._du_spline(x)
        if u.ndim == 0:
            return float(u), float(du)
        return u, du

    def scale(self) -> float:
        return float(np.max(np.abs(self.u) + np.abs(self.du)))

    def residual(self, field: CoefficientField1D) -> float:
        """Max of ``|alpha u'' + q u' + V u|`` over interior stencils, relative
        to ``max(|u| + |u'|)``.

        ``u''`` is a finite difference of the stored ``u'`` (fourth order on
        uniform stretches), so the check is independent of the integrator's
        own right-hand side.
        """
        idx, d2 = slope_difference(self.grid, self.du, field.breakpoints)
        if idx.size == 0:
            return 0.0
        x = self.grid[idx]
        a, q, v = field.evaluate(x)
        res = np.abs(a * d2 + q * self.du[idx] + v * self.u[idx])
        sc = self.scale()
        return float(res.max() / sc) if sc > 0 else float(res.max())


def _lagrange_slope_weights(xs, at):
    """Weights ``w[k]`` with ``f'(at) ~ sum_k w[k] f(xs[k])``.

    ``xs`` has shape ``(m, n)`` (m stencil points for n nodes), ``at`` shape
    ``(n,)``.  Exact for polynomials of degree ``m - 1``.
    """
    m = xs.shape[0]
    d = at[None, :] - xs  # (m, n)
    w = np.empty_like(xs)
    for k in range(m):
        others = [j for j in range(m) if j != k]
        denom = np.prod([xs[k] - xs[j] for j in others], axis=0)
        # derivative of prod_{j != k} (x - x_j) evaluated at ``at``
        num = np.zeros_like(at)
        for skip in others:
            num = num + np.prod([d[j] for j in others if j != skip], axis=0)
        w[k] = num / denom
    return w


def slope_difference(x, du, breakpoints=(), order=5):
    """Finite-difference ``u''`` from samples of ``u'``.

    Uses ``order``-point Lagrange stencils (centred where possible, shifted
    at the ends), fourth order for the default five points, on arbitrary
    grids.  Stencils with a breakpoint strictly inside are skipped.
    Returns ``(indices, values)``.
    """
    x = np.asarray(x, float)
    du = np.asarray(du, float)
    n = x.size
    m = min(order, n)
    if m < 3:
        return np.array([], int), np.array([])
    idx = np.arange(n)
    first = np.clip(idx - m // 2, 0, n - m)
    cols = first[None, :] + np.arange(m)[:, None]  # (m, n)
    w = _lagrange_slope_weights(x[cols], x)
    val = np.sum(w * du[cols], axis=0)
    keep = np.ones(n, bool)
    keep[[0, -1]] = False  # one-sided at the ends: keep the check interior
    bps = np.asarray(breakpoints, float)
    if bps.size:
        lo, hi = x[cols[0]], x[cols[-1]]
        span = hi - lo
        for b in bps:
            keep &= ~((lo + 1e-12 * span < b) & (b < hi - 1e-12 * span))
    return idx[keep], val[keep]


def _first_step(span, rate):
    """Initial step for scipy: its own guess divides by ``atol`` and turns into
    nan when a component starts at exactly zero under ``atol = 1e-300``."""
    return min(span, 1e-3 / (1.0 + rate))


def _sample_grid(x0, x_end, dx, n_samples, extra=()):
    if n_samples is None:
        n_samples = int(np.ceil((x_end - x0) / dx - 1e-9)) + 1
    grid = np.linspace(x0, x_end, max(int(n_samples), 2))
    extra = [e for e in extra if x0 < e < x_end]
    if extra:
        grid = np.unique(np.concatenate([grid, extra]))
        # drop samples closer than 1e-9 to a neighbour (keep the inserted points)
        keep = np.concatenate([[True], np.diff(grid) > 1e-9 * max(1.0, abs(x_end))])
        grid = grid[keep]
    return grid


def _check_span(field, x0, x_end):
    lo, hi = field.window
    eps = 1e-12 * max(1.0, abs(hi))
    if x0 < lo - eps or x_end > hi + eps:
        raise WindowExceeded(f"[{x0}, {x_end}] is not inside the field window {field.window}")
    if not x_end > x0:
        raise ValueError(f"x_end={x_end} must exceed x0={x0}")


def _evaluate_segments(segments, grid):
    """Evaluate a piecewise dense output on ``grid``.

    ``segments`` is a list of ``(x_start, x_stop, sol)``; each grid point is
    taken from the segment that contains it (left-closed).
    """
    out = np.empty((2, grid.size))
    starts = np.array([s[0] for s in segments])
    which = np.clip(np.searchsorted(starts, grid, side="right") - 1, 0, len(segments) - 1)
    for k, (_, _, sol) in enumerate(segments):
        sel = which == k
        if np.any(sel):
            out[:, sel] = sol(grid[sel])
    return out


def solve_linear_ivp(field: CoefficientField1D, x0, u0, du0, x_end, tol=1e-10, *,
                     dx=DEFAULT_DX, n_samples=None, method="RK45") -> Trajectory:
    """Integrate ``alpha u'' + q u' + V u = 0`` from ``(x0, u0, du0)`` to ``x_end``.

    ``tol`` is the relative tolerance of the step controller.  The returned
    trajectory is sampled every ``dx`` (or at ``n_samples`` points) and
    carries its finite-difference residual in ``meta['residual']``.
    """
    x0, x_end = float(x0), float(x_end)
    tol = check_positive(tol, "tol")
    _check_span(field, x0, x_end)
    alpha, drift, pot = field.alpha, field.drift, field.potential

    def rhs(x, y):
        u, p = y
        return [p, -(drift(x) * p + pot(x) * u) / alpha(x)]

    b_ = field.bounds
    rate = (b_.q_sup + np.sqrt(b_.v_sup * b_.alpha_sup)) / b_.alpha_inf
    cuts = [x0, *[b for b in field.breakpoints if x0 < b < x_end], x_end]
    y = np.array([float(u0), float(du0)])
    segments, nfev, nsteps = [], 0, 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        sol = solve_ivp(rhs, (a, b), y, method=method, rtol=tol, atol=1e-300,
                        dense_output=True, first_step=_first_step(b - a, rate))
        if sol.status != 0:
            raise IntegratorFailure(f"{method} failed on [{a}, {b}]: {sol.message}")
        segments.append((a, b, sol.sol))
        nfev += sol.nfev
        nsteps += sol.t.size - 1
        y = sol.y[:, -1]

    grid = _sample_grid(x0, x_end, dx, n_samples, field.breakpoints)
    u, du = _evaluate_segments(segments, grid)
    u[0], du[0] = float(u0), float(du0)
    a, q, v = field.evaluate(grid)
    d2u = -(q * du + v * u) / a
    traj = Trajectory(grid, u, du, d2u, meta={
        "integrator": method, "tol": tol, "field": field.name, "nfev": nfev,
        "n_steps": nsteps, "equation": "linear",
    })
    traj.meta["residual"] = traj.residual(field)
    return traj


def extremal_rhs(beta, gamma, variant, u, du):
    """``u''`` for the lower (``u'' = beta|u'| + gamma|u|``) or upper
    (``u'' = -beta|u'| - gamma|u|``) extremal equation."""
    s = beta * np.abs(du) + gamma * np.abs(u)
    if variant == "lower":
        return s
    if variant == "upper":
        return -s
    raise ValueError(f"variant must be 'lower' or 'upper', got {variant!r}")


def _sign(x):
    return 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)


def solve_extremal(beta, gamma, variant, x0, u0, du0, x_end, tol=1e-10, *,
                   dx=DEFAULT_DX, n_samples=None, method="RK45") -> Trajectory:
    """Integrate an extremal equation with sign-change restarts.

    Between zeros of ``u`` and ``u'`` the absolute values are replaced by
    fixed signs, so each segment is a linear constant-coefficient ODE; zeros
    are located by the integrator's root finder and integration restarts
    there with the new sign pattern.  Nothing is smoothed.
    """
    beta = check_nonnegative(beta, "beta")
    gamma = check_nonnegative(gamma, "gamma")
    if variant not in ("lower", "upper"):
        raise ValueError(f"variant must be 'lower' or 'upper', got {variant!r}")
    x0, x_end = float(x0), float(x_end)
    tol = check_positive(tol, "tol")
    if not x_end > x0:
        raise ValueError(f"x_end={x_end} must exceed x0={x0}")
    sgn = 1.0 if variant == "lower" else -1.0

    x, y = x0, np.array([float(u0), float(du0)])
    segments, events, nfev = [], [], 0
    for _ in range(_MAX_RESTARTS):
        if y[0] == 0.0 and y[1] == 0.0:
            # the zero solution continues forever
            segments.append((x, x_end, lambda t: np.zeros((2,) + np.shape(t))))
            break
        su = _sign(y[0]) or _sign(y[1])
        sd = _sign(y[1]) or _sign(sgn * gamma * abs(y[0]))

        def rhs(t, z, su=su, sd=sd):
            return [z[1], sgn * (beta * sd * z[1] + gamma * su * z[0])]

        def ev_u(t, z):
            return z[0]

        def ev_du(t, z):
            return z[1]

        ev_u.terminal = ev_du.terminal = True
        ev_u.direction = -su
        ev_du.direction = -sd
        evs = [ev_u] + ([ev_du] if sd != 0 else [])
        sol = solve_ivp(rhs, (x, x_end), y, method=method, rtol=tol, atol=1e-300,
                        dense_output=True, events=evs,
                        first_step=_first_step(x_end - x, beta + np.sqrt(gamma)))
        nfev += sol.nfev
        if sol.status == -1:
            raise IntegratorFailure(f"{method} failed at x={x}: {sol.message}")
        x_stop = float(sol.t[-1])
        segments.append((x, x_stop, sol.sol))
        if sol.status == 0 or x_stop >= x_end:
            break
        y = sol.y[:, -1].copy()
        if sol.t_events[0].size:
            y[0] = 0.0
            events.append(("u", x_stop))
        if len(sol.t_events) > 1 and sol.t_events[1].size:
            y[1] = 0.0
            events.append(("du", x_stop))
        x = x_stop
    else:
        raise IntegratorFailure(f"more than {_MAX_RESTARTS} sign changes before x_end")

    grid = _sample_grid(x0, x_end, dx, n_samples, [e[1] for e in events])
    u, du = _evaluate_segments(segments, grid)
    u[0], du[0] = float(u0), float(du0)
    # snap event abscissae to their exact zero
    for kind, xe in events:
        i = np.searchsorted(grid, xe)
        if i < grid.size and abs(grid[i] - xe) <= 1e-9 * max(1.0, abs(xe)):
            (u if kind == "u" else du)[i] = 0.0
    d2u = extremal_rhs(beta, gamma, variant, u, du)
    return Trajectory(grid, u, du, d2u, meta={
        "integrator": method, "tol": tol, "equation": f"extremal_{variant}",
        "beta": beta, "gamma": gamma, "events": events, "nfev": nfev,
    })


def extremal_residual(traj: Trajectory, beta, gamma, variant) -> float:
    """Relative residual of an extremal equation from finite differences of ``u'``."""
    idx, d2 = slope_difference(traj.grid, traj.du)
    if idx.size == 0:
        return 0.0
    ev = np.array([xe for _, xe in traj.meta.get("events", [])])
    if ev.size:
        # stencils straddling a kink of u' are not meaningful
        h = np.max(np.diff(traj.grid))
        near = np.min(np.abs(traj.grid[idx, None] - ev[None, :]), axis=1) < 2.5 * h
        idx, d2 = idx[~near], d2[~near]
    res = np.abs(d2 - extremal_rhs(beta, gamma, variant, traj.u[idx], traj.du[idx]))
    sc = traj.scale()
    return float(res.max() / sc) if sc > 0 and res.size else 0.0
