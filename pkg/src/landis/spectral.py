"""Principal Dirichlet eigenvalues of ``-(alpha u'' + q u' + V u)`` in 1D.

The generalised principal eigenvalue is approximated by the Dirichlet
eigenvalue on growing intervals, extrapolated in ``1/L^2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from sklearn.base import BaseEstimator

from .errors import ConvergenceFailure, InvariantViolated, NotPositive
from .fields import CoefficientField1D
from .ode1d.trajectory import Trajectory, slope_difference

__all__ = [
    "dirichlet_operator",
    "dirichlet_lambda1",
    "EigenEstimate",
    "generalized_lambda1",
    "supersolution_check",
    "PrincipalEigenvalueEstimator",
]

RESIDUAL_RTOL = 1e-8
MAX_PECLET = 1.0


def dirichlet_operator(field: CoefficientField1D, a: float, b: float, mesh_n: int):
    """Central-difference bands of ``-L`` on the interior nodes of ``[a, b]``.

    Returns ``(x_interior, sub, diag, sup, dx)``; ``sub[i]`` multiplies
    ``phi[i-1]`` in row ``i`` and ``sup[i]`` multiplies ``phi[i+1]``.
    """
    x = np.linspace(a, b, mesh_n + 1)
    dx = (b - a) / mesh_n
    xi = x[1:-1]
    al, q, v = field.evaluate(xi)
    al = np.broadcast_to(al, xi.shape).astype(float)
    q = np.broadcast_to(q, xi.shape).astype(float)
    v = np.broadcast_to(v, xi.shape).astype(float)
    sub = -al / dx**2 + q / (2 * dx)
    sup = -al / dx**2 - q / (2 * dx)
    diag = 2 * al / dx**2 - v
    return xi, sub, diag, sup, dx


def _peclet(field, a, b, mesh_n):
    x = np.linspace(a, b, mesh_n + 1)
    al, q, _ = field.evaluate(x)
    return float(np.max(np.abs(q) * ((b - a) / mesh_n) / (2 * al)))


def _apply(sub, diag, sup, phi):
    out = diag * phi
    out[1:] += sub[1:] * phi[:-1]
    out[:-1] += sup[:-1] * phi[1:]
    return out


def _inverse_iteration(sub, diag, sup, shift, maxiter=500):
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1] = diag - shift
    ab[2, :-1] = sub[1:]
    phi = np.ones(n)
    lam = shift
    for _ in range(maxiter):
        y = solve_banded((1, 1), ab, phi)
        mu = float(phi @ y / (phi @ phi))
        phi_new = y / np.max(np.abs(y))
        lam_new = shift + 1.0 / mu
        done = np.max(np.abs(phi_new - phi)) < 1e-14 and abs(lam_new - lam) <= 1e-15 * max(1.0, abs(lam_new))
        phi, lam = phi_new, lam_new
        if done:
            break
    return lam, phi


def dirichlet_lambda1(field: CoefficientField1D, interval=None, mesh_n: int = 1024):
    """Principal Dirichlet eigenvalue of ``-L`` on ``interval``.

    ``mesh_n`` is doubled until the mesh Peclet number ``|q| dx / (2 alpha)``
    drops below one.  Returns ``(lam, x, phi)`` with ``x`` including both
    endpoints, ``phi`` zero there, positive inside and of max one.

    Raises
    ------
    ConvergenceFailure
        If inverse iteration does not reach a residual of ``1e-8 * max|phi|``.
    """
    a, b = field.window if interval is None else map(float, interval)
    if mesh_n < 16:
        raise ValueError(f"mesh_n must be >= 16, got {mesh_n}")
    if not (field.x_lo - 1e-12 <= a < b <= field.x_hi + 1e-12):
        raise ValueError(f"interval [{a}, {b}] not inside window {field.window}")
    while _peclet(field, a, b, mesh_n) >= MAX_PECLET:
        mesh_n *= 2
        if mesh_n > 2**24:
            raise ConvergenceFailure("mesh refinement for the Peclet bound did not terminate")
    xi, sub, diag, sup, _ = dirichlet_operator(field, a, b, mesh_n)
    # Gershgorin: every eigenvalue has real part >= min(diag - |sub| - |sup|)
    off = np.abs(sub) + np.abs(sup)
    off[0] -= abs(sub[0])
    off[-1] -= abs(sup[-1])
    lo = float(np.min(diag - off))
    shift = lo - 1e-3 * max(1.0, abs(lo))
    for _ in range(4):
        lam, phi = _inverse_iteration(sub, diag, sup, shift)
        if phi[np.argmax(np.abs(phi))] < 0:
            phi = -phi
        res = float(np.max(np.abs(_apply(sub, diag, sup, phi) - lam * phi)))
        if res <= RESIDUAL_RTOL * np.max(np.abs(phi)):
            break
        # halve the distance to the estimate; a shift too close to the
        # eigenvalue makes the solve itself the noise floor
        shift = 0.5 * (shift + lam)
    if not res <= RESIDUAL_RTOL * np.max(np.abs(phi)) or np.any(phi <= 0):
        raise ConvergenceFailure(f"eigen-solve residual {res:.3e}, min phi {phi.min():.3e}")
    x = np.concatenate([[a], xi, [b]])
    return lam, x, np.concatenate([[0.0], phi, [0.0]])


@dataclass(frozen=True)
class EigenEstimate:
    radii: np.ndarray
    lambdas: np.ndarray
    lambda_inf: float
    err_est: float
    eigenfunction: np.ndarray  # (2, n): x and phi on the largest interval

    @property
    def negative(self) -> bool:
        return self.lambda_inf < 0

    @property
    def flag(self) -> str:
        if self.negative:
            return "lambda_1 < 0: sign hypothesis of the decay theorems not met"
        return ""


def generalized_lambda1(field: CoefficientField1D, radii, mesh_density: float = 50.0,
                        origin: float | None = None) -> EigenEstimate:
    """Dirichlet eigenvalues on ``[origin, origin + L]`` for each ``L`` in ``radii``.

    ``lambda_inf`` extrapolates the last two values assuming
    ``lambda(L) ~ lambda_inf + c / L^2``; ``err_est`` is the change from the
    extrapolation of the previous pair (or from the last raw value when
    only two radii are given).
    """
    radii = np.asarray(radii, float)
    if radii.ndim != 1 or radii.size < 2 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be an increasing sequence of length >= 2")
    x0 = field.x_lo if origin is None else float(origin)
    lams, last = [], None
    for L in radii:
        n = max(16, int(math.ceil(mesh_density * L)))
        lam, x, phi = dirichlet_lambda1(field, (x0, x0 + L), n)
        lams.append(lam)
        last = (x, phi)
    lams = np.array(lams)
    step = np.diff(lams)
    if np.any(step > 1e-10 * np.maximum(1.0, np.abs(lams[1:]))):
        warnings.warn("Dirichlet eigenvalues increase with the interval", InvariantViolated, stacklevel=2)

    def extrap(i):
        l1, l2 = radii[i - 1] ** 2, radii[i] ** 2
        return (l2 * lams[i] - l1 * lams[i - 1]) / (l2 - l1)

    lam_inf = extrap(len(radii) - 1)
    err = abs(lam_inf - (extrap(len(radii) - 2) if radii.size > 2 else lams[-1]))
    return EigenEstimate(radii, lams, float(lam_inf), float(err), np.vstack(last))


def supersolution_check(field: CoefficientField1D, traj, lam: float = 0.0,
                        rtol: float = RESIDUAL_RTOL) -> bool:
    """Whether ``(L + lam) u <= rtol * scale`` at every interior node.

    ``traj`` is a :class:`Trajectory` or an ``(x, u)`` pair.  With a
    trajectory ``u''`` comes from a fourth-order difference of ``u'``;
    with bare samples the three-point stencil is used, which matches the
    discretisation of :func:`dirichlet_lambda1`.
    """
    if isinstance(traj, Trajectory):
        x, u = traj.grid, traj.u
        idx, d2 = slope_difference(x, traj.du, field.breakpoints)
        du = traj.du[idx]
    else:
        x, u = (np.asarray(t, float) for t in traj)
        h0, h1 = np.diff(x)[:-1], np.diff(x)[1:]
        idx = np.arange(1, x.size - 1)
        d2 = 2 * (h0 * u[2:] - (h0 + h1) * u[1:-1] + h1 * u[:-2]) / (h0 * h1 * (h0 + h1))
        du = (u[2:] - u[:-2]) / (h0 + h1)
    inner = u[idx]
    if np.any(inner <= 0):
        raise NotPositive("u must be positive at interior nodes")
    a, q, v = field.evaluate(x[idx])
    lu = a * d2 + q * du + (v + lam) * inner
    scale = float(np.max(np.abs(u)))
    return bool(np.max(lu) <= rtol * scale)


class PrincipalEigenvalueEstimator(BaseEstimator):
    """Generalised principal eigenvalue of a 1D field.

    Parameters
    ----------
    radii : sequence of float
        Interval lengths, measured from the left end of the window.
    mesh_density : float
        Mesh points per unit length.
    """

    def __init__(self, radii=(5.0, 10.0, 20.0, 40.0), mesh_density=50.0):
        self.radii = radii
        self.mesh_density = mesh_density

    def fit(self, field: CoefficientField1D, y=None):
        est = generalized_lambda1(field, self.radii, self.mesh_density)
        self.lambdas_ = est.lambdas
        self.lambda_inf_ = est.lambda_inf
        self.err_est_ = est.err_est
        self.eigenfunction_ = est.eigenfunction
        self.estimate_ = est
        return self
