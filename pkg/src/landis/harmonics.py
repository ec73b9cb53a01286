"""Spherical-harmonic reduction of radial operators in dimension 2 and 3.

A function ``u(r, sigma)`` sampled on ``radial_grid x angular quadrature``
is projected on real orthonormal harmonics ``phi_j`` of the unit sphere.
Each coefficient ``u_j(r)`` solves a one-dimensional equation with the
centrifugal potential ``-lambda_j / r^2``, ``lambda_j = l (l + N - 2)``.

Modes are numbered from ``j = 1`` by increasing degree ``l``; within a
degree, ``m`` runs from ``-l`` to ``l`` (``N = 3``) or cos before sin
(``N = 2``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import QuadratureTooCoarse, WindowContainsOrigin
from .fields import CoefficientField1D, as_function
from .ode1d.trajectory import Trajectory
from .rates import DEFAULT_TAIL_FRACTION

__all__ = [
    "AngularQuadrature",
    "angular_quadrature",
    "normalized_legendre",
    "mode_degree",
    "SphericalModeSet",
    "decompose",
    "reconstruct",
    "mode_field",
    "ModeReport",
    "RadialUCIReport",
    "verify_radial_uci",
    "radialize",
    "SphericalHarmonicTransform",
]


def sphere_area(n_dim: int) -> float:
    return {2: 2 * math.pi, 3: 4 * math.pi}[_check_dim(n_dim)]


def _check_dim(n_dim):
    if n_dim not in (2, 3):
        raise ValueError(f"n_dim must be 2 or 3, got {n_dim}")
    return n_dim


def n_modes(n_dim: int, band: int) -> int:
    """Number of harmonics of degree ``<= band``."""
    return 2 * band + 1 if n_dim == 2 else (band + 1) ** 2


def mode_degree(j: int, n_dim: int) -> int:
    """Degree ``l`` of the ``j``-th mode (``j >= 1``)."""
    if j < 1:
        raise ValueError(f"mode index starts at 1, got {j}")
    _check_dim(n_dim)
    return j // 2 if n_dim == 2 else math.isqrt(j - 1)


def laplace_beltrami_eigenvalue(l: int, n_dim: int) -> float:
    return float(l * (l + n_dim - 2))


def normalized_legendre(band: int, mu):
    """Orthonormal associated Legendre functions ``P[l, m](mu)``, ``m <= l``.

    Normalised so that ``P[l, m](cos t) e^{i m p}`` has unit ``L^2`` norm on
    the sphere; no Condon-Shortley phase.  Returns shape
    ``(band + 1, band + 1) + mu.shape``.
    """
    mu = np.asarray(mu, float)
    sin_t = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    p = np.zeros((band + 1, band + 1) + mu.shape)
    p[0, 0] = 1.0 / math.sqrt(4 * math.pi)
    for m in range(1, band + 1):
        p[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * sin_t * p[m - 1, m - 1]
    for m in range(band):
        p[m + 1, m] = math.sqrt(2 * m + 3) * mu * p[m, m]
        for l in range(m + 2, band + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            p[l, m] = a * (mu * p[l - 1, m] - b * p[l - 2, m])
    return p


@dataclass(frozen=True)
class AngularQuadrature:
    """Nodes and weights on the unit circle or sphere.

    ``angles`` holds ``theta`` (N = 2) or ``(polar, azimuth)`` columns
    (N = 3); nodes are flattened polar-major.
    """

    n_dim: int
    angles: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def size(self) -> int:
        return self.weights.size

    @cached_property
    def points(self) -> np.ndarray:
        """Unit vectors, shape ``(size, n_dim)``."""
        if self.n_dim == 2:
            return np.column_stack([np.cos(self.angles), np.sin(self.angles)])
        t, p = self.angles.T
        return np.column_stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])

    def basis(self, band: int):
        """``(degrees, orders, values)``; ``values`` has shape ``(n_modes, size)``."""
        if self.n_dim == 2:
            th = self.angles
            rows, ls, ms = [np.full(th.shape, 1 / math.sqrt(2 * math.pi))], [0], [0]
            for l in range(1, band + 1):
                rows += [np.cos(l * th) / math.sqrt(math.pi), np.sin(l * th) / math.sqrt(math.pi)]
                ls += [l, l]
                ms += [l, -l]
            return np.array(ls), np.array(ms), np.array(rows)
        t, ph = self.angles.T
        p = normalized_legendre(band, np.cos(t))
        rows, ls, ms = [], [], []
        for l in range(band + 1):
            for m in range(-l, l + 1):
                if m == 0:
                    rows.append(p[l, 0])
                elif m > 0:
                    rows.append(math.sqrt(2) * p[l, m] * np.cos(m * ph))
                else:
                    rows.append(math.sqrt(2) * p[l, -m] * np.sin(-m * ph))
                ls.append(l)
                ms.append(m)
        return np.array(ls), np.array(ms), np.array(rows)

    def gram(self, band: int) -> np.ndarray:
        _, _, phi = self.basis(band)
        return (phi * self.weights) @ phi.T


def angular_quadrature(n_dim: int, band: int, n_nodes=None) -> AngularQuadrature:
    """Quadrature exact for products of harmonics of degree ``<= band``.

    ``n_nodes`` overrides the node count: an int for N = 2, a pair
    ``(n_polar, n_azimuth)`` for N = 3.  Defaults are ``4 band + 1`` on the
    circle and ``(band + 1, 2 band + 1)`` on the sphere.
    """
    _check_dim(n_dim)
    if band < 0:
        raise ValueError(f"band must be >= 0, got {band}")
    if n_dim == 2:
        n = 4 * band + 1 if n_nodes is None else int(n_nodes)
        th = 2 * math.pi * np.arange(n) / n
        return AngularQuadrature(2, th, np.full(n, 2 * math.pi / n), n - 1)
    n_t, n_p = (band + 1, 2 * band + 1) if n_nodes is None else map(int, n_nodes)
    mu, w = np.polynomial.legendre.leggauss(n_t)
    ph = 2 * math.pi * np.arange(n_p) / n_p
    T, P = np.meshgrid(np.arccos(mu), ph, indexing="ij")
    W = np.outer(w, np.full(n_p, 2 * math.pi / n_p))
    return AngularQuadrature(3, np.column_stack([T.ravel(), P.ravel()]), W.ravel(),
                             min(2 * n_t - 1, n_p - 1))


@dataclass(frozen=True)
class SphericalModeSet:
    n_dim: int
    band: int
    lambdas: np.ndarray
    degrees: np.ndarray
    orders: np.ndarray
    radial_grid: np.ndarray
    u_modes: np.ndarray  # (n_modes, n_r)
    quadrature: AngularQuadrature
    truncation: np.ndarray | None = None  # residual L2(S) norm per radius
    du_modes: np.ndarray | None = None

    def __len__(self):
        return self.u_modes.shape[0]

    @property
    def modes(self):
        """``[(j, lambda_j, phi_j samples)]`` for the retained modes."""
        _, _, phi = self.quadrature.basis(self.band)
        return [(j + 1, float(self.lambdas[j]), phi[j]) for j in range(len(self))]

    def trajectory(self, j: int) -> Trajectory:
        if self.du_modes is None:
            raise ValueError("mode set carries no radial derivatives")
        return Trajectory(self.radial_grid, self.u_modes[j - 1], self.du_modes[j - 1],
                          meta={"mode": j, "lambda_j": float(self.lambdas[j - 1])})


def _mode_arrays(n_dim, band, quad):
    ls, ms, phi = quad.basis(band)
    lam = np.array([laplace_beltrami_eigenvalue(l, n_dim) for l in ls])
    return ls, ms, phi, lam


def decompose(u_samples, band: int, n_dim: int = 3, radial_grid=None, *,
              quadrature: AngularQuadrature | None = None, du_samples=None) -> SphericalModeSet:
    """Project samples of shape ``(n_r, quadrature.size)`` on the harmonics.

    ``du_samples`` (radial derivative on the same nodes) is projected too,
    so that each mode can be checked against its ODE.
    """
    quad = angular_quadrature(n_dim, band) if quadrature is None else quadrature
    if quad.n_dim != n_dim:
        raise ValueError("quadrature dimension does not match n_dim")
    if quad.exact_degree < 2 * band:
        raise QuadratureTooCoarse(
            f"quadrature exact to degree {quad.exact_degree}, need {2 * band}")
    u = np.atleast_2d(np.asarray(u_samples, float))
    if u.shape[1] != quad.size:
        raise ValueError(f"expected {quad.size} angular samples, got {u.shape[1]}")
    r = np.arange(u.shape[0], dtype=float) if radial_grid is None else np.asarray(radial_grid, float)
    ls, ms, phi, lam = _mode_arrays(n_dim, band, quad)
    coef = (phi * quad.weights) @ u.T
    rest = u - coef.T @ phi
    trunc = np.sqrt(rest**2 @ quad.weights)
    dcoef = None
    if du_samples is not None:
        dcoef = (phi * quad.weights) @ np.atleast_2d(np.asarray(du_samples, float)).T
    return SphericalModeSet(n_dim, band, lam, ls, ms, r, coef, quad, trunc, dcoef)


def reconstruct(mode_set: SphericalModeSet) -> np.ndarray:
    """Samples ``sum_j u_j(r) phi_j`` on the quadrature nodes, shape ``(n_r, size)``."""
    k = len(mode_set)
    n_r = mode_set.radial_grid.size
    if k == 0:
        return np.zeros((n_r, mode_set.quadrature.size))
    _, _, phi = mode_set.quadrature.basis(mode_set.band)
    return mode_set.u_modes.T @ phi[:k]


def _radial(f):
    return as_function(0.0 if f is None else f)


def mode_field(j: int, q=None, V=None, n_dim: int = 3, window=(1.0, 10.0)) -> CoefficientField1D:
    """1D field of mode ``j``: ``alpha = 1``, drift ``(N-1)/r + q``,
    potential ``V - lambda_j / r^2``."""
    lo, hi = map(float, window)
    if lo <= 0:
        raise WindowContainsOrigin(f"radial window {window} must stay away from r = 0")
    lam = laplace_beltrami_eigenvalue(mode_degree(j, n_dim), n_dim)
    qf, vf = _radial(q), _radial(V)
    c = n_dim - 1.0

    def drift(r):
        return c / r + qf(r)

    def potential(r):
        return vf(r) - lam / (np.asarray(r, float) ** 2)

    return CoefficientField1D.from_callables(
        1.0, drift, potential, (lo, hi), name=f"mode_{j}_N{n_dim}")


class ModeReport(NamedTuple):
    j: int
    lambda_j: float
    env_start: float
    sup_env: float
    tail_env: float
    collapsed: bool
    residual: float


class RadialUCIReport(NamedTuple):
    kappa: float
    threshold: float
    hypothesis_met: bool
    modes: list
    flagged: bool
    message: str


def _tail_threshold(q, V, r):
    qa = np.abs(np.broadcast_to(_radial(q)(r), r.shape))
    va = np.abs(np.broadcast_to(_radial(V)(r), r.shape))
    return float(qa.max() / 2 + math.sqrt(qa.max() ** 2 / 4 + va.max()))


def verify_radial_uci(mode_set: SphericalModeSet, kappa: float, q=None, V=None, *,
                      residual_tol: float = 1e-6, zero_tol: float = 1e-12) -> RadialUCIReport:
    """Per-mode envelopes ``|u_j(r)| e^{kappa r}`` on the radial grid.

    A mode *collapses* when its envelope over the last 20% of the grid stays
    below its value at the first radius.  If the threshold hypothesis holds
    and every non-zero mode collapses, the report is flagged: the data decay
    faster than the decay theorem permits, either a falsification candidate
    or a truncation artefact.
    """
    r = mode_set.radial_grid
    r_tail = r[-1] - DEFAULT_TAIL_FRACTION * (r[-1] - r[0])
    thr = _tail_threshold(q, V, r[r >= r_tail])
    met = kappa > thr
    scale = float(np.max(np.abs(mode_set.u_modes))) if len(mode_set) else 0.0
    reports = []
    for j in range(1, len(mode_set) + 1):
        u = mode_set.u_modes[j - 1]
        if np.max(np.abs(u)) <= zero_tol * max(scale, 1e-300):
            continue
        env = np.abs(u) * np.exp(kappa * r)
        tail = float(env[r >= r_tail].max())
        res = math.nan
        if mode_set.du_modes is not None:
            fld = mode_field(j, q, V, mode_set.n_dim, (r[0], r[-1]))
            res = mode_set.trajectory(j).residual(fld)
            if res > residual_tol:
                raise ValueError(f"mode {j}: residual {res:.3e} exceeds {residual_tol:.3e}")
        reports.append(ModeReport(j, float(mode_set.lambdas[j - 1]), float(env[0]),
                                  float(env.max()), tail, bool(tail < env[0]), res))
    flagged = bool(met and reports and all(m.collapsed for m in reports))
    if not met:
        msg = f"kappa={kappa:.6g} does not exceed the tail threshold {thr:.6g}; no conclusion"
    elif flagged:
        msg = "decays faster than the theorem permits: falsification candidate or truncation artefact"
    else:
        msg = "consistent: some mode does not decay faster than e^{-kappa r}"
    return RadialUCIReport(float(kappa), thr, bool(met), reports, flagged, msg)


class Radialized(NamedTuple):
    field: CoefficientField1D
    C: float  # sup of |Tr A - A_ee| / (2 alpha~); drift inflation C / r


def radialize(A: Callable, q_vec: Callable, V, window, n_dim: int = 3, direction=None,
              grid_n: int = 2001) -> Radialized:
    """Restrict an operator with matrix ``A``, drift ``q_vec`` and potential
    ``V`` (all functions of a point ``x`` in ``R^N``) to the ray ``r e``.

    ``alpha~ = e.A e``, ``q~ = q.e + (Tr A - e.A e) / r``, ``V~ = V``.
    """
    lo, hi = map(float, window)
    if lo <= 0:
        raise WindowContainsOrigin(f"radial window {window} must stay away from r = 0")
    e = np.eye(n_dim)[0] if direction is None else np.asarray(direction, float)
    e = e / np.linalg.norm(e)
    Vf = V if callable(V) else (lambda x, c=float(V): c)

    def _mat(r):
        return np.asarray(A(r * e), float)

    def alpha(r):
        r = np.asarray(r, float)
        return np.vectorize(lambda s: e @ _mat(s) @ e)(r)

    def drift(r):
        r = np.asarray(r, float)

        def one(s):
            m = _mat(s)
            return float(np.asarray(q_vec(s * e), float) @ e + (np.trace(m) - e @ m @ e) / s)

        return np.vectorize(one)(r)

    def potential(r):
        r = np.asarray(r, float)
        return np.vectorize(lambda s: float(Vf(s * e)))(r)

    fld = CoefficientField1D.from_callables(alpha, drift, potential, (lo, hi),
                                            name=f"radialized_N{n_dim}", grid_n=grid_n)
    rs = np.linspace(lo, hi, grid_n)
    gap = np.array([(np.trace(_mat(s)) - e @ _mat(s) @ e) / (2 * (e @ _mat(s) @ e)) for s in rs])
    return Radialized(fld, float(np.max(np.abs(gap))))


class SphericalHarmonicTransform(TransformerMixin, BaseEstimator):
    """Forward and inverse transform between angular samples and mode coefficients.

    Parameters
    ----------
    n_dim : int
        2 (circle) or 3 (sphere).
    band : int
        Largest retained degree.
    n_nodes : int, pair of int or None
        Quadrature size override, see :func:`angular_quadrature`.
    """

    def __init__(self, n_dim=3, band=4, n_nodes=None):
        self.n_dim = n_dim
        self.band = band
        self.n_nodes = n_nodes

    def fit(self, X=None, y=None):
        self.quadrature_ = angular_quadrature(self.n_dim, self.band, self.n_nodes)
        if self.quadrature_.exact_degree < 2 * self.band:
            raise QuadratureTooCoarse(
                f"quadrature exact to degree {self.quadrature_.exact_degree}, need {2 * self.band}")
        self.degrees_, self.orders_, self.basis_, self.lambdas_ = _mode_arrays(
            self.n_dim, self.band, self.quadrature_)
        self.n_features_in_ = self.quadrature_.size
        if X is not None:
            check_array(X)
            if np.shape(X)[1] != self.n_features_in_:
                raise ValueError(f"expected {self.n_features_in_} columns, got {np.shape(X)[1]}")
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=float)
        return X @ (self.basis_ * self.quadrature_.weights).T

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=float)
        return X @ self.basis_[: X.shape[1]]
