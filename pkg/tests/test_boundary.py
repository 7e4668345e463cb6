import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import base_params
from poissoncb import boundary
from poissoncb.analytic import build_constrained_solution, derivatives, price_constrained
from poissoncb.boundary import (boundary_coefficients, boundary_residual, count_sign_changes,
                                locate_conversion_boundary, polynomial_residual,
                                solve_conversion_boundary, verify_smooth_pasting)
from poissoncb.errors import BracketError, DomainError, PastingViolation
from poissoncb.model import ModelParams, exponents, threshold_sbar, upper_bound


def _pasting_gap(p, x):
    """Independent route: impose v(x) = gamma x and v(sbar) = U on the upper piece at 60 digits,
    then return v'(x+) - v'(x-) where the lower piece is A s^alpha + c/r with A from v(x) = gamma x."""
    mp.mp.dps = 60
    r, q, sig, lam, c, K, g = (mp.mpf(v) for v in (p.r, p.q, p.sigma, p.lam, p.c, p.K, p.gamma))
    b = r - q - sig**2 / 2
    a = (-b + mp.sqrt(b**2 + 2 * r * sig**2)) / sig**2
    disc = mp.sqrt(b**2 + 2 * (r + lam) * sig**2)
    bp, bm = (-b + disc) / sig**2, (-b - disc) / sig**2
    sb = (q + lam) / (r + lam) * K / g
    part = lambda s: c / (r + lam) + lam * g * s / (q + lam)  # noqa: E731
    M = mp.matrix([[x**bp, x**bm], [sb**bp, sb**bm]])
    rhs = mp.matrix([g * x - part(x), (c + lam * K) / (r + lam) - part(sb)])
    Bp, Bm = mp.lu_solve(M, rhs)
    right = Bp * bp * x ** (bp - 1) + Bm * bm * x ** (bm - 1) + lam * g / (q + lam)
    A = (g * x - c / r) / x**a
    left = A * a * x ** (a - 1)
    return right - left


def _mp_root(p, guess):
    mp.mp.dps = 60
    return float(mp.findroot(lambda x: _pasting_gap(p, x), mp.mpf(guess), tol=mp.mpf(10) ** -40))


@pytest.mark.parametrize("lam, c, want", [(1.0, 0.005, 0.2932), (100.0, 0.015, 1.0059),
                                          (1.0, 0.030, 1.2262)])
def test_reference_roots(lam, c, want):
    assert solve_conversion_boundary(base_params(lam=lam, c=c)) == pytest.approx(want, abs=5e-5)


def test_tie_column_sits_at_threshold():
    p = base_params(c=0.03)
    root = locate_conversion_boundary(p)
    assert root.at_threshold
    assert root.x_star == pytest.approx(threshold_sbar(p), rel=1e-15)


def test_sign_change_across_reference_large_intensity_root():
    p = base_params(lam=1e4, c=0.005)
    assert boundary_residual(p, 0.3395) > 0 > boundary_residual(p, 0.3397)


def test_residual_at_threshold_formula():
    p = base_params(c=0.01)
    e = exponents(p)
    sb = threshold_sbar(p)
    want = -(e.beta_plus - e.beta_minus) * (p.q * p.gamma * sb / (p.q + p.lam) - p.c / (p.r + p.lam))
    assert boundary_residual(p, sb) == pytest.approx(want, rel=1e-12)


def test_residual_domain():
    p = base_params()
    with pytest.raises(DomainError):
        boundary_residual(p, 0.0)
    with pytest.raises(DomainError):
        boundary_residual(p, threshold_sbar(p) * 1.01)
    with pytest.raises(DomainError):
        solve_conversion_boundary(base_params(c=0.04))


def test_bracket_error_when_no_sign_change(monkeypatch):
    monkeypatch.setattr(boundary, "_residual_y", lambda p, sb, y: 1.0)
    with pytest.raises(BracketError):
        solve_conversion_boundary(base_params())


@pytest.mark.parametrize("lam, c", [(1.0, 0.005), (1.0, 0.02), (100.0, 0.015), (1e4, 0.01)])
def test_root_matches_high_precision_pasting(lam, c):
    p = base_params(lam=lam, c=c)
    x = solve_conversion_boundary(p)
    assert x == pytest.approx(_mp_root(p, x), rel=1e-11)


@pytest.mark.parametrize("lam, c", [(1.0, 0.005), (1.0, 0.02), (5.0, 0.01)])
def test_root_zeroes_raw_polynomial(lam, c):
    p = base_params(lam=lam, c=c)
    x = solve_conversion_boundary(p)
    C = boundary_coefficients(p)
    d = exponents(p).beta_plus - exponents(p).beta_minus
    scale = max(abs(C.C1 * x ** (d + 1)), abs(C.C2 * x**d), abs(C.C3 * x), abs(C.C4))
    assert abs(polynomial_residual(p, x)) <= 1e-9 * scale


def test_rescaled_residual_stays_finite_where_raw_form_is_huge():
    p = base_params(lam=1e4, c=0.01)
    C = boundary_coefficients(p)
    assert abs(C.C3) > 1e100 and abs(C.C4) > 1e100
    x = solve_conversion_boundary(p)
    assert math.isfinite(boundary_residual(p, x))
    assert abs(boundary_residual(p, x)) < 1e-10


def test_pasting_report_at_root():
    p = base_params()
    rep = verify_smooth_pasting(p, solve_conversion_boundary(p), strict=False)
    assert rep.mismatch <= 1e-8
    assert rep.slope_below_gamma and rep.lower_convex and rep.below_payoff
    assert not rep.degenerate


def test_pasting_perturbed_root_fails():
    p = base_params()
    x = solve_conversion_boundary(p) * 1.01
    rep = verify_smooth_pasting(p, x, strict=False)
    assert rep.mismatch > 1e-8
    with pytest.raises(PastingViolation) as exc:
        verify_smooth_pasting(p, x)
    assert any("v'(x-) - v'(x+)" in f for f in exc.value.failed)


@pytest.mark.parametrize("lam, c", [(1.0, 0.02), (100.0, 0.015), (1.0, 0.005)])
def test_upper_concavity_flag_matches_ode_sign(lam, c):
    # where v < gamma s and v < K the ODE gives 0.5 sigma^2 s^2 v'' = r v - (r-q) s v' - c - lam (gamma s - v)
    p = base_params(lam=lam, c=c)
    sol = build_constrained_solution(p)
    s = np.linspace(sol.x_star, sol.sbar, 12)[1:-1]
    v, d1, d2 = derivatives(sol, s)
    rhs = p.r * v - (p.r - p.q) * s * d1 - p.c - p.lam * (p.gamma * s - v)
    implied = rhs / (0.5 * p.sigma**2 * s**2)
    assert np.allclose(implied, d2, rtol=1e-6)
    rep = verify_smooth_pasting(p, sol.x_star, strict=False)
    assert rep.upper_concave == bool(np.all(implied < 0))


def test_degenerate_pasting_report():
    p = base_params(c=0.03)
    rep = verify_smooth_pasting(p, solve_conversion_boundary(p))
    assert rep.degenerate and rep.ok and rep.mismatch == 0.0


def test_value_at_threshold_recovers_upper_bound():
    for lam in (0.1, 1.0, 100.0, 1e4):
        for c in (0.005, 0.015, 0.025):
            p = base_params(lam=lam, c=c)
            sol = build_constrained_solution(p)
            assert price_constrained(sol, sol.sbar * (1 - 1e-14)) == pytest.approx(upper_bound(p),
                                                                                 rel=1e-8)


@pytest.mark.parametrize("c", [0.005, 0.01, 0.015, 0.02, 0.025, 0.03])
def test_monotone_in_intensity(c):
    xs = [solve_conversion_boundary(base_params(lam=l, c=c))
          for l in (0.1, 0.5, 1, 5, 10, 100, 1e4)]
    assert all(b >= a - 1e-12 for a, b in zip(xs, xs[1:]))


def test_scale_covariance():
    for lam, c in ((1.0, 0.005), (100.0, 0.02), (1e4, 0.01)):
        p = base_params(lam=lam, c=c)
        q = base_params(lam=lam, c=2 * c, K=2.0)
        assert solve_conversion_boundary(q) == pytest.approx(2 * solve_conversion_boundary(p),
                                                             rel=1e-10)


case3_params = st.builds(
    lambda q, dr, sigma, lam, frac, K, g: ModelParams(q + dr, q, sigma, lam, frac * q * K, K, g),
    q=st.floats(0.005, 0.1), dr=st.floats(0.002, 0.1), sigma=st.floats(0.05, 0.8),
    lam=st.floats(0.05, 1e4), frac=st.floats(0.02, 0.999), K=st.floats(0.2, 5.0),
    g=st.floats(0.1, 1.0))


@settings(max_examples=1000, deadline=None)
@given(case3_params)
def test_unique_sign_change(p):
    assert count_sign_changes(p) == 1
    root = locate_conversion_boundary(p)
    assert 0 < root.x_star <= threshold_sbar(p)
    hi = root.bracket[1]
    assert root.bracket[1] - root.bracket[0] <= 1e-12 * threshold_sbar(p) + 1e-15 * hi
