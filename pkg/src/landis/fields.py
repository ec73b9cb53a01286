"""Coefficient fields for one-dimensional operators ``a u'' + q u' + V u``.

A field is a set of closed-form evaluators on a finite window together with
declared bounds.  Sampling resolution is always the caller's choice; the
declared bounds are what threshold formulas may rely on.

The half-line is truncated to ``window``; every "limsup at infinity" used
downstream is a sup over a tail sub-window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._validation import check_interval
from .errors import (
    BoundViolation,
    NonPositiveAlpha,
    ParameterOutOfRange,
    UnknownProfile,
)

__all__ = [
    "FieldBounds",
    "CoefficientField1D",
    "ParamSpec",
    "FieldLibraryEntry",
    "PROFILES",
    "constant",
    "piecewise_constant",
    "smooth_random",
    "radial_bessel_like",
    "make_profile",
    "sup_ratios",
]

# relative slack used when bounds are certified from dense samples
_SAMPLE_SLACK = 1e-9


class Constant:
    """Vectorised constant function; scalar in, scalar out."""

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.value
        return np.full(np.shape(x), self.value)

    def __repr__(self):
        return f"Constant({self.value!r})"


def as_function(f) -> Callable:
    if callable(f):
        return f
    return Constant(f)


@dataclass(frozen=True)
class FieldBounds:
    """Declared bounds: ``alpha_inf <= alpha <= alpha_sup``, ``|q| <= q_sup``,
    ``|V| <= v_sup``."""

    alpha_inf: float
    alpha_sup: float
    q_sup: float
    v_sup: float

    def __post_init__(self):
        if not self.alpha_inf > 0:
            raise NonPositiveAlpha(f"alpha_inf must be > 0, got {self.alpha_inf}")
        if self.alpha_sup < self.alpha_inf or self.q_sup < 0 or self.v_sup < 0:
            raise ValueError(f"inconsistent bounds {self}")

    @property
    def beta_bound(self) -> float:
        """Certified upper bound for ``sup |q|/alpha``."""
        return self.q_sup / self.alpha_inf

    @property
    def gamma_bound(self) -> float:
        """Certified upper bound for ``sup |V|/alpha``."""
        return self.v_sup / self.alpha_inf


@dataclass(frozen=True)
class CoefficientField1D:
    """Closed-form coefficients on ``window = (x_lo, x_hi)``.

    ``alpha``, ``drift`` and ``potential`` accept scalars or arrays.
    ``breakpoints`` lists interior points where a coefficient may jump;
    integrators restart there.
    """

    window: tuple[float, float]
    alpha: Callable
    drift: Callable
    potential: Callable
    bounds: FieldBounds
    name: str = "custom"
    params: Mapping = dc_field(default_factory=dict)
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        lo, hi = check_interval(*self.window, name="window")
        if lo < 0:
            raise ValueError(f"window must lie in [0, inf), got {self.window}")
        object.__setattr__(self, "window", (lo, hi))
        bps = tuple(sorted(float(b) for b in self.breakpoints if lo < b < hi))
        object.__setattr__(self, "breakpoints", bps)

    @property
    def x_lo(self) -> float:
        return self.window[0]

    @property
    def x_hi(self) -> float:
        return self.window[1]

    def evaluate(self, x):
        """Return ``(alpha, q, V)`` at ``x``."""
        return self.alpha(x), self.drift(x), self.potential(x)

    def grid(self, grid_n: int, lo: float | None = None, hi: float | None = None):
        if grid_n < 2:
            raise ValueError(f"grid_n must be >= 2, got {grid_n}")
        lo = self.x_lo if lo is None else lo
        hi = self.x_hi if hi is None else hi
        return np.linspace(lo, hi, int(grid_n))

    def sample(self, grid_n: int, lo: float | None = None, hi: float | None = None):
        """Sample on a uniform grid; returns ``(x, alpha, q, V)`` arrays."""
        x = self.grid(grid_n, lo, hi)
        a, q, v = self.evaluate(x)
        return (
            x,
            np.broadcast_to(np.asarray(a, float), x.shape),
            np.broadcast_to(np.asarray(q, float), x.shape),
            np.broadcast_to(np.asarray(v, float), x.shape),
        )

    def check_bounds(self, grid_n: int = 4001) -> None:
        """Raise if sampled values escape the declared bounds."""
        _, a, q, v = self.sample(grid_n)
        b = self.bounds
        if np.any(a <= 0):
            raise NonPositiveAlpha(f"{self.name}: sampled alpha <= 0")
        tol = 1e-12
        if np.any(a < b.alpha_inf * (1 - tol)) or np.any(a > b.alpha_sup * (1 + tol)):
            raise BoundViolation(f"{self.name}: alpha outside [{b.alpha_inf}, {b.alpha_sup}]")
        if np.max(np.abs(q)) > b.q_sup * (1 + tol) + tol:
            raise BoundViolation(f"{self.name}: |q| exceeds q_sup={b.q_sup}")
        if np.max(np.abs(v)) > b.v_sup * (1 + tol) + tol:
            raise BoundViolation(f"{self.name}: |V| exceeds v_sup={b.v_sup}")

    def restrict(self, lo: float, hi: float) -> "CoefficientField1D":
        """Same coefficients on a sub-window (bounds are kept, still valid)."""
        if lo < self.x_lo or hi > self.x_hi:
            raise ValueError(f"[{lo}, {hi}] is not inside {self.window}")
        return CoefficientField1D(
            (lo, hi), self.alpha, self.drift, self.potential, self.bounds,
            self.name, self.params, self.breakpoints,
        )

    @classmethod
    def from_callables(cls, alpha, drift, potential, window, *, name="custom",
                       grid_n: int = 20001, breakpoints=()):
        """Build a field and certify bounds from dense samples (with slack).

        Sampling cannot certify a sup for arbitrary functions; use this only
        for coefficients that are Lipschitz on the scale of the grid.
        """
        alpha, drift, potential = map(as_function, (alpha, drift, potential))
        x = np.linspace(window[0], window[1], grid_n)
        a = np.broadcast_to(np.asarray(alpha(x), float), x.shape)
        q = np.broadcast_to(np.asarray(drift(x), float), x.shape)
        v = np.broadcast_to(np.asarray(potential(x), float), x.shape)
        if np.any(a <= 0):
            raise NonPositiveAlpha(f"{name}: sampled alpha <= 0")
        s = 1 + _SAMPLE_SLACK
        bounds = FieldBounds(
            alpha_inf=float(a.min()) / s,
            alpha_sup=float(a.max()) * s,
            q_sup=float(np.abs(q).max()) * s,
            v_sup=float(np.abs(v).max()) * s,
        )
        return cls(tuple(window), alpha, drift, potential, bounds, name,
                   breakpoints=tuple(breakpoints))


def sup_ratios(field: CoefficientField1D, grid_n: int = 20001,
               lo: float | None = None, hi: float | None = None):
    """Sampled ``(beta, gamma) = (max |q|/alpha, max |V|/alpha)``."""
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    _, a, q, v = field.sample(grid_n, lo, hi)
    if np.any(a <= 0):
        raise NonPositiveAlpha(f"{field.name}: sampled alpha <= 0")
    beta = float(np.max(np.abs(q) / a))
    gamma = float(np.max(np.abs(v) / a))
    return beta, gamma


# ---------------------------------------------------------------------------
# profile library


@dataclass(frozen=True)
class ParamSpec:
    default: object
    lo: float | None = None
    hi: float | None = None
    doc: str = ""

    def validate(self, name, value):
        if self.lo is None and self.hi is None:
            return value
        try:
            x = float(value)
        except (TypeError, ValueError):
            raise ParameterOutOfRange(f"{name}={value!r} is not a number") from None
        if (self.lo is not None and x < self.lo) or (self.hi is not None and x > self.hi):
            raise ParameterOutOfRange(f"{name}={x} outside [{self.lo}, {self.hi}]")
        return x


@dataclass(frozen=True)
class FieldLibraryEntry:
    name: str
    parameters: Mapping[str, ParamSpec]
    constructor: Callable[..., CoefficientField1D]
    uses_seed: bool = False

    def build(self, params: Mapping | None = None, seed: int = 0) -> CoefficientField1D:
        params = dict(params or {})
        unknown = set(params) - set(self.parameters)
        if unknown:
            raise ParameterOutOfRange(
                f"profile {self.name!r} has no parameter(s) {sorted(unknown)}; "
                f"known: {sorted(self.parameters)}")
        kwargs = {}
        for key, spec in self.parameters.items():
            kwargs[key] = spec.validate(key, params.get(key, spec.default))
        if self.uses_seed:
            kwargs["seed"] = int(seed)
        return self.constructor(**kwargs)


def constant(a=1.0, q=0.0, v=-1.0, x_lo=0.0, x_hi=30.0) -> CoefficientField1D:
    a, q, v = float(a), float(q), float(v)
    if a <= 0:
        raise NonPositiveAlpha(f"alpha must be > 0, got {a}")
    return CoefficientField1D(
        (x_lo, x_hi), Constant(a), Constant(q), Constant(v),
        FieldBounds(a, a, abs(q), abs(v)),
        name="constant", params={"a": a, "q": q, "v": v},
    )


class _Piecewise:
    def __init__(self, breakpoints, values):
        self.breakpoints = np.asarray(breakpoints, float)
        self.values = np.asarray(values, float)

    def __call__(self, x):
        # right-continuous: x == breakpoint takes the value to its right
        idx = np.searchsorted(self.breakpoints, x, side="right")
        out = self.values[idx]
        return float(out) if np.ndim(x) == 0 else out


def piecewise_constant(breakpoints: Sequence[float], values: Sequence[Sequence[float]],
                       x_lo=0.0, x_hi=30.0) -> CoefficientField1D:
    """Piecewise-constant ``(a, q, v)`` triples, one more triple than breakpoints."""
    bps = np.asarray(breakpoints, float).ravel()
    vals = np.asarray(values, float).reshape(-1, 3)
    if vals.shape[0] != bps.size + 1:
        raise ParameterOutOfRange(
            f"need {bps.size + 1} (a, q, v) triples for {bps.size} breakpoints")
    if bps.size and np.any(np.diff(bps) <= 0):
        raise ParameterOutOfRange("breakpoints must be strictly increasing")
    if np.any(vals[:, 0] <= 0):
        raise NonPositiveAlpha("alpha must be > 0 on every piece")
    bounds = FieldBounds(
        float(vals[:, 0].min()), float(vals[:, 0].max()),
        float(np.abs(vals[:, 1]).max()), float(np.abs(vals[:, 2]).max()),
    )
    return CoefficientField1D(
        (x_lo, x_hi), _Piecewise(bps, vals[:, 0]), _Piecewise(bps, vals[:, 1]),
        _Piecewise(bps, vals[:, 2]), bounds, name="piecewise_constant",
        params={"breakpoints": tuple(bps), "values": tuple(map(tuple, vals))},
        breakpoints=tuple(bps),
    )


class FourierSum:
    """``mean + sum_k amp_k cos(freq_k x + phase_k)``; sup bound is exact."""

    def __init__(self, mean, amps, freqs, phases):
        self.mean = float(mean)
        self.amps = np.asarray(amps, float)
        self.freqs = np.asarray(freqs, float)
        self.phases = np.asarray(phases, float)
        self._terms = list(zip(self.amps.tolist(), self.freqs.tolist(), self.phases.tolist()))

    @property
    def sup_abs(self) -> float:
        return abs(self.mean) + float(np.abs(self.amps).sum())

    @property
    def inf(self) -> float:
        return self.mean - float(np.abs(self.amps).sum())

    def __call__(self, x):
        if np.ndim(x) == 0:
            # scalar fast path: the integrators call this once per stage
            x = float(x)
            return self.mean + sum(a * math.cos(w * x + p) for a, w, p in self._terms)
        x = np.asarray(x, float)
        return self.mean + np.cos(np.multiply.outer(x, self.freqs) + self.phases) @ self.amps


def _fourier(rng, mean, amplitude, n_modes, max_freq):
    w = rng.dirichlet(np.ones(n_modes)) * rng.choice([-1.0, 1.0], size=n_modes)
    freqs = rng.uniform(0.05, max_freq, size=n_modes)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_modes)
    return FourierSum(mean, amplitude * w, freqs, phases)


def smooth_random(seed=0, a_amp=0.3, q_amp=1.0, v_amp=1.0, a_mean=1.0, q_mean=0.0,
                  v_mean=-1.0, n_modes=4, max_freq=1.5, x_lo=0.0, x_hi=30.0):
    """Random truncated Fourier coefficients with analytically certified bounds.

    Each coefficient is ``mean + sum_k c_k cos(w_k x + p_k)`` with
    ``sum_k |c_k| = amplitude``, so ``sup |coef| <= |mean| + amplitude``.
    """
    if a_amp >= a_mean:
        raise ParameterOutOfRange(f"a_amp={a_amp} must be < a_mean={a_mean} (alpha > 0)")
    n_modes = int(n_modes)
    rng = np.random.default_rng(int(seed))
    alpha = _fourier(rng, a_mean, a_amp, n_modes, max_freq)
    drift = _fourier(rng, q_mean, q_amp, n_modes, max_freq)
    pot = _fourier(rng, v_mean, v_amp, n_modes, max_freq)
    bounds = FieldBounds(alpha.inf, alpha.sup_abs, drift.sup_abs, pot.sup_abs)
    params = dict(seed=int(seed), a_amp=a_amp, q_amp=q_amp, v_amp=v_amp, a_mean=a_mean,
                  q_mean=q_mean, v_mean=v_mean, n_modes=n_modes, max_freq=max_freq)
    return CoefficientField1D((x_lo, x_hi), alpha, drift, pot, bounds,
                              name="smooth_random", params=params)


class _InverseR:
    def __init__(self, c):
        self.c = float(c)

    def __call__(self, r):
        if np.ndim(r) == 0:
            return self.c / float(r)
        return self.c / np.asarray(r, float)


def radial_bessel_like(n_dim=3, x_lo=1.0, x_hi=10.0) -> CoefficientField1D:
    """Radial Laplacian minus one: ``alpha = 1``, ``q = (N-1)/r``, ``V = -1``."""
    n_dim = int(n_dim)
    if x_lo <= 0:
        raise ParameterOutOfRange("radial window must exclude r = 0")
    c = n_dim - 1
    return CoefficientField1D(
        (x_lo, x_hi), Constant(1.0), _InverseR(c), Constant(-1.0),
        FieldBounds(1.0, 1.0, c / x_lo, 1.0), name="radial_bessel_like",
        params={"n_dim": n_dim},
    )


_WINDOW = {"x_lo": ParamSpec(0.0, 0.0, 1e6), "x_hi": ParamSpec(30.0, 0.0, 1e6)}

PROFILES: dict[str, FieldLibraryEntry] = {
    "constant": FieldLibraryEntry("constant", {
        "a": ParamSpec(1.0, 1e-12, 1e12), "q": ParamSpec(0.0, -1e12, 1e12),
        "v": ParamSpec(-1.0, -1e12, 1e12), **_WINDOW}, constant),
    "piecewise_constant": FieldLibraryEntry("piecewise_constant", {
        "breakpoints": ParamSpec(()), "values": ParamSpec(((1.0, 0.0, -1.0),)),
        **_WINDOW}, piecewise_constant),
    "smooth_random": FieldLibraryEntry("smooth_random", {
        "a_amp": ParamSpec(0.3, 0.0, 1e6), "q_amp": ParamSpec(1.0, 0.0, 1e6),
        "v_amp": ParamSpec(1.0, 0.0, 1e6), "a_mean": ParamSpec(1.0, 1e-12, 1e6),
        "q_mean": ParamSpec(0.0, -1e6, 1e6), "v_mean": ParamSpec(-1.0, -1e6, 1e6),
        "n_modes": ParamSpec(4, 1, 64), "max_freq": ParamSpec(1.5, 0.05, 100.0),
        **_WINDOW}, smooth_random, uses_seed=True),
    "radial_bessel_like": FieldLibraryEntry("radial_bessel_like", {
        "n_dim": ParamSpec(3, 1, 16), "x_lo": ParamSpec(1.0, 1e-9, 1e6),
        "x_hi": ParamSpec(10.0, 0.0, 1e6)}, radial_bessel_like),
}


def make_profile(entry, params: Mapping | None = None, seed: int = 0) -> CoefficientField1D:
    """Build a library profile by name (or entry) from ``params`` and ``seed``."""
    if isinstance(entry, str):
        try:
            entry = PROFILES[entry]
        except KeyError:
            raise UnknownProfile(f"unknown profile {entry!r}; known: {sorted(PROFILES)}") from None
    return entry.build(params, seed)
