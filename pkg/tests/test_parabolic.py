import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landis.errors import (
    DomainError,
    InvariantViolated,
    KappaBelowThreshold,
    NormalizationCollarEmpty,
    NotPositive,
)
from landis.fields import radial_bessel_like
from landis.ode1d import Trajectory
from landis.parabolic import (
    Barrier,
    SpaceTimeField,
    certify_lower_bound,
    chi,
    chi_derivatives,
    chi_limit_check,
    pick_parameters,
    subsolution_grid,
    verify_subsolution,
)
from landis.rates import q_poly
from landis.spectral import supersolution_check


def test_chi_values():
    assert chi(0.0, 3.0, 2.0) == 1.0
    assert chi(3.0, 3.0, 2.0) == 0.0 and chi(4.0, 3.0, 2.0) == 0.0
    assert chi(1.0, 10.0, 1.0) == pytest.approx(0.9**10, rel=1e-14)
    assert 0.9**10 == pytest.approx(0.348678, abs=1e-6)


def test_chi_derivative_examples():
    d_r, d_rr, d_s, bound = chi_derivatives(0.0, 5.0, 1.5)
    assert d_r == pytest.approx(-1.5)
    assert chi_derivatives(0.3, 0.5, 2.0)[1] == pytest.approx(0.0, abs=1e-14)
    d_r, *_ = chi_derivatives(1.0, 10.0, 1.0)
    assert d_r == pytest.approx(-(10 / 9) * 0.9**10, rel=1e-14)
    assert d_r == pytest.approx(-0.387420, abs=1e-6)
    with pytest.raises(DomainError):
        chi_derivatives(2.0, 2.0, 1.0)


@settings(max_examples=100)
@given(st.floats(0.05, 20), st.floats(0.0, 0.99), st.floats(0.1, 5))
def test_chi_derivatives_finite_differences(s, frac, k):
    r = frac * s
    d_r, d_rr, d_s, bound = chi_derivatives(r, s, k)
    c = chi(r, s, k)
    if c < 1e-200:
        return
    # higher r-derivatives of log chi scale like 1/(s - r)^n, not (kappa S)^n
    S = 1 / (1 - frac)
    L = k * S + S / s
    h = 1e-3 / L
    scale = c * (k * S + 1 / s)
    fd_s = (chi(r, s + h, k) - chi(r, s - h, k)) / (2 * h)
    assert abs(fd_s - d_s) <= 1e-6 * scale
    if r >= h:
        fd_r = (chi(r + h, s, k) - chi(r - h, s, k)) / (2 * h)
        assert abs(fd_r - d_r) <= 1e-6 * abs(d_r)
        h2 = 2e-3 / L
        fd_rr = (chi(r + h2, s, k) - 2 * c + chi(r - h2, s, k)) / h2**2
        assert abs(fd_rr - d_rr) <= 1e-4 * scale * (k * S + 1 / s)
    assert d_s <= bound + 1e-12 * abs(bound)


@settings(max_examples=100)
@given(st.floats(1, 20), st.floats(0, 0.95), st.floats(0, 0.04), st.floats(0.1, 3), st.floats(0, 2))
def test_chi_monotone(s, f1, df, k, dk):
    assert chi(f1 * s, s, k) >= chi((f1 + df) * s, s, k)
    assert chi(f1 * s, s, k) >= chi(f1 * s, s, k + dk)


def test_pick_parameters_n1():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    assert fld.kappa_tilde == pytest.approx(1.0) and fld.C == 0.0
    b = pick_parameters(fld, 1.2)
    assert b.admissible and b.margin_fraction >= 0.1 - 1e-12
    assert b.h >= 1 / b.kappa
    hand = Barrier(1.2, 0.0, 100.0, 0.01, 0.0, 0.2)
    assert hand.admissibility() == pytest.approx(-0.04 + 1.2 * 0.01 + 1.2 / 100)
    assert hand.admissible


def test_pick_parameters_n3():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=3)
    assert fld.C == 2.0
    b = pick_parameters(fld, 1.5)
    direct = -(0.5**2) + 1.5 * 2 / b.R + 1.5 * b.delta + 1.5 / b.h
    assert direct < 0 and direct == pytest.approx(b.admissibility())
    assert b.margin_fraction >= 0.1 - 1e-12
    assert pick_parameters(fld, 1.5, R1=1e4).R > 1e4


def test_pick_parameters_rejects():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    with pytest.raises(KappaBelowThreshold):
        pick_parameters(fld, 1.0)
    with pytest.raises(KappaBelowThreshold):
        pick_parameters(fld, 1.0 + 1e-6)


@pytest.mark.parametrize("n_dim", [1, 3])
def test_verify_subsolution_passes(n_dim):
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=n_dim)
    rep = verify_subsolution(fld, pick_parameters(fld, 1.2), (400, 400))
    assert rep.passed and rep.max_residual <= 1e-8
    assert rep.refined.passed
    assert rep.refined.fd_discrepancy < rep.fd_discrepancy


def test_verify_subsolution_h_too_small():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    b = Barrier(1.2, 0.0, 0.5, 0.01, 0.0, 0.2)
    with pytest.warns(InvariantViolated):
        rep = verify_subsolution(fld, b, (100, 100), refine=False)
    assert not rep.passed


def test_verify_subsolution_delta_too_large():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    b = pick_parameters(fld, 1.2)
    big = Barrier(b.kappa, b.R, b.h, 20.0, b.C, b.eps)
    assert not big.admissible
    rep = verify_subsolution(fld, big, (200, 200))
    assert not rep.passed and rep.max_residual > 0


def test_q_perturbation_on_grid():
    fld = SpaceTimeField.from_callables(
        lambda r, t: 1 + 0.5 * np.sin(r) ** 2, lambda r, t: 0.3 * np.cos(r + t), lambda r, t: -np.exp(-r ** 2) - 0.5,
        1, (0.0, 50.0), 10.0)
    # the threshold is a tail quantity, so the bound is checked on the tail
    rho, t = np.meshgrid(np.linspace(40, 50, 201), np.linspace(-10, 0, 51))
    a, q, v = fld.evaluate(rho, t)
    eps = 0.1
    assert np.all(q_poly(a, np.abs(q), np.abs(v), fld.kappa_tilde + eps) >= a * eps**2 - 1e-12)


def test_subsolution_grid_shapes():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    rho, t, eta, res = subsolution_grid(fld, pick_parameters(fld, 1.2), (10, 7))
    assert rho.shape == t.shape == eta.shape == res.shape == (10, 7)
    assert np.all((eta >= 0) & (eta <= 1))


def _stationary(b, f, n_rho=400, n_t=5, log=False):
    rho = np.linspace(b.R, b.R + 4 * b.h, n_rho)
    t = np.linspace(-1.0, 0.0, n_t)
    vals = f(rho)
    return np.tile(vals, (n_t, 1)), rho, t


def test_certify_bessel_log():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=3)
    b = pick_parameters(fld, 1.1)
    u, rho, t = _stationary(b, lambda r: -r - np.log(r))
    rep = certify_lower_bound(u, rho, t, 1.1, b, log=True)
    assert rep.passed and rep.min_margin > 0
    # u e^{kappa (|x| - R)} grows without bound along the ray
    assert rep.log_ratio_exp[-1] > rep.log_ratio_exp[0] + 10


def test_certify_bessel_linear():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=3)
    b = pick_parameters(fld, 1.5)
    u, rho, t = _stationary(b, lambda r: np.exp(-(r - b.R)) * b.R / r)
    assert certify_lower_bound(u, rho, t, 1.5, b).passed


def test_certify_barrier_is_tight():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    b = pick_parameters(fld, 1.2)
    rho = np.linspace(b.R, b.R + b.h, 300)
    t = np.linspace(-5.0, 0.0, 6)
    u = b.eta(rho[None, :], t[:, None])
    rep = certify_lower_bound(u, rho, t, 1.2, b, normalize=False)
    assert rep.passed and abs(rep.min_margin) <= 1e-15


def test_certify_errors():
    fld = SpaceTimeField.constant(1.0, 0.0, -1.0, n_dim=1)
    b = pick_parameters(fld, 1.2)
    rho = np.linspace(b.R, b.R + 1, 5)
    t = np.array([-1.0, 0.0])
    with pytest.raises(NotPositive):
        certify_lower_bound(np.zeros((2, 5)), rho, t, 1.2, b)
    with pytest.raises(NormalizationCollarEmpty):
        certify_lower_bound(np.ones((1, 5)), rho, np.array([0.0]), 1.2, b)


def test_exp2_not_a_supersolution():
    f = radial_bessel_like(3, 5.0, 30.0)
    r = np.linspace(5, 30, 2501)
    u = Trajectory.from_function(r, lambda s: np.exp(-2 * s), lambda s: -2 * np.exp(-2 * s))
    assert not supersolution_check(f, u)


def test_chi_limit():
    one = chi_limit_check(1.0, [1.0], [1e-3])
    assert one.deviations[0] <= 1e-3
    assert chi_limit_check(1.0, [0.0], [1e-2, 1e-3]).deviations.tolist() == [0.0, 0.0]
    r = np.linspace(0, 5, 501)
    lim = chi_limit_check(1.0, r, [1e-3, 5e-4])
    assert lim.decreasing and lim.deviations[0] <= 2e-2
    assert 0.4 <= lim.ratios[0] <= 0.6
    assert np.allclose(lim.deviations, lim.asymptotic, rtol=2e-2)
