import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landis.errors import (
    KappaPrimeNotGreater,
    KappaZero,
    NotNormalizable,
    PreconditionNotSteep,
    ResidualTooLarge,
    WindowExceeded,
)
from landis.fields import constant, radial_bessel_like, smooth_random, sup_ratios
from landis.ode1d import (
    Trajectory,
    bounce_search,
    cauchy_w,
    comparison_v,
    dense_gap_scan,
    detect_bounce,
    envelope,
    extremal_residual,
    max_ratio_at_endpoints,
    solve_extremal,
    solve_linear_ivp,
    verify_uci,
)
from landis.rates import sharp_rate


def rel_err(u, exact):
    return float(np.max(np.abs(u - exact)) / np.max(np.abs(exact)))


# -- linear solves

def test_exp_decay():
    t = solve_linear_ivp(constant(1, 0, -1, 0, 10), 0, 1, -1, 10)
    assert rel_err(t.u, np.exp(-t.grid)) < 1e-8
    assert t.u[0] == 1 and t.du[0] == -1
    assert t.meta["residual"] < 1e-6


def test_characteristic_roots():
    t = solve_linear_ivp(constant(1, 3, 2, 0, 10), 0, 1, -2, 10)
    assert rel_err(t.u, np.exp(-2 * t.grid)) < 1e-8


def test_bessel_radial():
    e = math.exp(-1)
    t = solve_linear_ivp(radial_bessel_like(3), 1, e, -2 * e, 10)
    # relative to the sup norm; the growing companion e^r/r amplifies
    # pointwise relative errors by up to e^18 at r = 10
    assert rel_err(t.u, np.exp(-t.grid) / t.grid) < 1e-6


def test_window_exceeded():
    with pytest.raises(WindowExceeded):
        solve_linear_ivp(constant(x_hi=5), 0, 1, -1, 6)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 1000), du0=st.floats(-5, 0))
def test_tolerance_consistency(seed, du0):
    f = smooth_random(seed=seed, x_hi=15.0)
    a = solve_linear_ivp(f, 0, 1, du0, 15, 1e-8)
    b = solve_linear_ivp(f, 0, 1, du0, 15, 1e-9)
    assert np.max(np.abs(a.u - b.u)) <= 10 * 1e-8 * np.max(np.abs(b.u))


# -- extremal solves

@pytest.mark.parametrize("variant", ["lower", "upper"])
def test_extremal_straight_line(variant):
    t = solve_extremal(0, 0, variant, 0, 1, -1, 3)
    assert np.max(np.abs(t.u - (1 - t.grid))) < 1e-10


@pytest.mark.parametrize("beta,gamma", [(0.0, 1.0), (1.0, 2.0), (3.0, 0.5)])
def test_lower_extremal_decaying_branch(beta, gamma):
    # u > 0, u' < 0 turns the lower equation into u'' + beta u' - gamma u = 0
    k = sharp_rate(beta, gamma).kappa
    t = solve_extremal(beta, gamma, "lower", 0, 1, -k, 5)
    assert rel_err(t.u, np.exp(-k * t.grid)) < 1e-8
    assert extremal_residual(t, beta, gamma, "lower") < 1e-6


@pytest.mark.parametrize("beta,gamma", [(0.0, 1.0), (2.0, 1.0), (3.0, 1.0), (0.5, 4.0)])
def test_upper_extremal_matches_cauchy_w(beta, gamma):
    w = cauchy_w(beta, gamma)
    t = solve_extremal(beta, gamma, "upper", 0, 0, 1, w.x_hat, 1e-12)
    assert rel_err(t.u, w(t.grid)) < 1e-8
    assert extremal_residual(t, beta, gamma, "upper") < 1e-6


def test_comparison_principle_on_extremal_families():
    beta, gamma = 1.0, 2.0
    k = sharp_rate(beta, gamma).kappa
    grid = np.linspace(0, 2, 401)
    sub, sup = (Trajectory(grid, *solve_extremal(beta, gamma, "lower", 0, u0, du0, 2).interpolate(grid))
                for u0, du0 in [(1, -k - 0.3), (2, -0.5)])
    for a, b in [(0, 2), (0.25, 1.0), (0.5, 1.5)]:
        ok, excess, _ = max_ratio_at_endpoints(sub, sup, a, b)
        assert ok, excess


# -- closed forms

def test_comparison_v_oscillatory():
    v = comparison_v(0, 1, 2)
    assert (v.A, v.B) == pytest.approx((1.5, -0.5), rel=1e-15)
    assert v.xi == pytest.approx(math.log(3) / 2, abs=1e-12)


def test_comparison_v_drift():
    v = comparison_v(2, 1, 3)
    r2 = math.sqrt(2)
    assert v.kappa == pytest.approx(1 + r2)
    assert v.B == pytest.approx((r2 - 2) / (2 * r2), rel=1e-14)
    assert v.A == pytest.approx(1 - v.B, rel=1e-15)
    assert abs(v(v.xi)) <= 1e-12


def test_comparison_v_limit():
    v = comparison_v(0.5, 0.5, sharp_rate(0.5, 0.5).kappa + 1e-9)
    assert -1e-8 < v.B < 0 and 1 < v.A < 1 + 1e-8
    with pytest.raises(KappaPrimeNotGreater):
        comparison_v(0, 1, 1)


@settings(max_examples=100)
@given(st.floats(0, 50), st.floats(1e-3, 50), st.floats(1e-3, 5))
def test_comparison_v_system(beta, gamma, dk):
    v = comparison_v(beta, gamma, sharp_rate(beta, gamma).kappa + dk)
    assert v.A + v.B == pytest.approx(1.0, abs=1e-12)
    assert v.derivative(0.0) == pytest.approx(-v.kappa_prime, rel=1e-12)
    assert v.B < 0 < 1 < v.A and v.xi > 0


def test_cauchy_w_critical():
    w = cauchy_w(2, 1)
    assert w.case == "critical" and w.x_hat == pytest.approx(1.0)
    assert w(1.0) == pytest.approx(math.exp(-1))
    assert w.margin == pytest.approx(math.exp(math.sqrt(2)) - 1 / (1 + math.sqrt(2)), rel=1e-13)


def test_cauchy_w_oscillatory():
    w = cauchy_w(0, 1)
    assert w.x_hat == pytest.approx(math.pi / 2)
    assert w(w.x_hat) == pytest.approx(1.0)
    assert w.margin == pytest.approx(math.exp(math.pi / 2) - 1, rel=1e-13)


def test_cauchy_w_x_hat_is_critical_point():
    for b, c in [(1.0, 2.0), (0.1, 5.0), (3.0, 1.0), (2.0, 1.0)]:
        w = cauchy_w(b, c)
        assert abs(w.derivative(w.x_hat)) < 1e-12
        assert w.derivative(0.5 * w.x_hat) > 0


def test_cauchy_w_increasing():
    w = cauchy_w(2, 0)
    assert w.increasing and math.isinf(w.x_hat)
    assert w.w_limit == pytest.approx(0.5)
    x = np.linspace(0, 5, 11)
    assert np.allclose(w(x), (1 - np.exp(-2 * x)) / 2)
    with pytest.raises(KappaZero):
        cauchy_w(0, 0)


@settings(max_examples=200)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cauchy_w_margin_positive(beta, gamma):
    assert cauchy_w(beta, gamma).margin > 0


# -- bounce, envelope, UCI

def test_bounce_closed_form():
    f = constant(1, 0, -1, 0, 5)
    t = solve_linear_ivp(f, 0, 1, -2, 5)
    b = detect_bounce(t, 1.0, 0.0)
    assert b.h < 3
    x = b.h
    u = (3 * math.exp(-x) - math.exp(x)) / 2
    assert -u > math.exp(-x) and b.ratio > 0
    assert b.x_tilde == pytest.approx(math.log(3) / 2, abs=1e-10)


def test_not_steep():
    t = Trajectory.from_function(np.linspace(0, 5, 501), lambda x: np.exp(-x), lambda x: -np.exp(-x))
    with pytest.raises(PreconditionNotSteep):
        detect_bounce(t, 1.0, 1.3)


@pytest.mark.parametrize("beta,gamma", [(0.0, 1.0), (1.0, 2.0), (3.0, 0.5)])
def test_bounce_of_extremal_trajectory(beta, gamma):
    # past its zero the extremal solution dominates a multiple of w, so the
    # bounce happens before x_tilde + x_hat
    k = sharp_rate(beta, gamma).kappa
    t = solve_extremal(beta, gamma, "upper", 0, 1, -(k + 0.5), 10 / k)
    b = detect_bounce(t, k, 0.0)
    assert b.h <= b.x_tilde + cauchy_w(beta, gamma).x_hat


def test_bounce_search_extends_window():
    f = constant(1, 0.5, 0.2, 0, 100)
    k = sharp_rate(0.5, 0.2).kappa
    wit, traj, used = bounce_search(f, 0.0, 1.0, -(k + 0.5), k, initial_length=0.1)
    assert used <= 10 / k and wit.h <= used


def test_envelope_examples():
    x = np.linspace(0, 10, 201)
    e = envelope(Trajectory.from_function(x, lambda s: np.exp(-s), lambda s: -np.exp(-s)), 1.0)
    assert np.allclose(e.samples[1], 1.0) and e.sup_env == pytest.approx(1.0)
    r = np.linspace(1, 10, 181)
    e = envelope(Trajectory.from_function(r, lambda s: np.exp(-s) / s,
                                          lambda s: -np.exp(-s) * (1 / s + 1 / s**2)), 1.0)
    assert e.sup_env == pytest.approx(1.0) and e.argmax == 1.0
    assert np.all(np.diff(e.samples[1]) < 0)


def test_envelope_after_bounce():
    t = solve_linear_ivp(constant(1, 0, -1, 0, 5), 0, 1, -2, 5)
    env = envelope(t, 1.0).samples[1]
    assert env[t.grid > 0].max() >= env[0]


def test_verify_uci_equality_case():
    f = constant(1, 0, -1, 0, 10)
    t = solve_linear_ivp(f, 0, 1, -1, 10)
    for x0 in (1.0, 4.0, 7.5):
        rep = verify_uci(f, t, x0)
        assert rep.passed and rep.tail_passed
        assert rep.sup_env_after_x0 == pytest.approx(1.0, rel=1e-7)


def test_verify_uci_oscillatory_subfamily():
    for seed in range(3):
        f = smooth_random(seed=seed, v_mean=1.0)
        t = solve_linear_ivp(f, 0, 1, -2.0, 30)
        assert all(verify_uci(f, t, x0).passed for x0 in (1, 5, 10))


def test_verify_uci_rejects_bad_residual():
    f = constant(1, 0, -1, 0, 10)
    x = np.linspace(0, 10, 1001)
    t = Trajectory.from_function(x, lambda s: np.exp(-2 * s), lambda s: -2 * np.exp(-2 * s))
    with pytest.raises(ResidualTooLarge):
        verify_uci(f, t, 1.0)


def test_dense_gap_examples():
    x = np.linspace(0, 10, 1001)
    t = Trajectory.from_function(x, lambda s: np.exp(-s), lambda s: -np.exp(-s))
    assert dense_gap_scan(t, 1.5, 1.0).max_gap == 0.0
    t = solve_linear_ivp(constant(1, 0, -1, 0, 5), 0, 1, -2, 5)
    res = dense_gap_scan(t, 1.5)
    x_z = math.log(3) / 2
    (a, b), = [g for g in res.gaps if g[0] <= x_z <= g[1]]
    assert 0 < b - a and b < t.x_hi
    with pytest.raises(NotNormalizable):
        dense_gap_scan(Trajectory(x, np.sin(x), np.cos(x)), 2.0)


def test_dense_gap_uniform_over_oscillatory_family():
    gaps = []
    for seed in range(20):
        f = smooth_random(seed=seed, v_mean=1.0)
        t = solve_linear_ivp(f, 0, 1, -1, 30)
        k = sharp_rate(*sup_ratios(f)).kappa
        res = dense_gap_scan(t, 1.1 * k, k)
        gaps.append(res.max_gap)
    assert max(gaps) < 30
