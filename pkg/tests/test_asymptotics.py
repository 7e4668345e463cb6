import math

import numpy as np
import pytest

from conftest import base_params
from poissoncb.asymptotics import (TABLE1_COUPONS, TABLE1_LAMBDAS, TABLE1_NOTE, TABLE1_REFERENCE,
                                   boundary_sweep, classical_boundary, figure_data, loglog_slope,
                                   price_gap_profile, rate_check_case1, rate_check_case2,
                                   reproduce_table1, table1_params)
from poissoncb.errors import DomainError, MismatchError
from poissoncb.model import conversion_threshold_coupon, exponents


def test_sweep_examples():
    rows = boundary_sweep(table1_params(), [100.0], [0.01, 0.025])
    by_c = {r.c: r for r in rows}
    assert by_c[0.01].x_star_lambda == pytest.approx(0.6706, abs=5e-5)
    assert by_c[0.025].target_kind == "sbar"
    assert by_c[0.025].limit_target == 1.25
    assert by_c[0.01].target_kind == "x*"


def test_sweep_sorted_and_failures_kept():
    rows = boundary_sweep(table1_params(), [100.0, 1.0], [0.04, 0.02])
    assert [(r.c, r.lam) for r in rows] == [(0.02, 1.0), (0.02, 100.0), (0.04, 1.0), (0.04, 100.0)]
    bad = [r for r in rows if r.failed]
    assert len(bad) == 2 and all(math.isnan(r.x_star_lambda) for r in bad)
    assert "low-coupon" in bad[0].error


def test_column_monotone_to_classical_value():
    rows = boundary_sweep(table1_params(), [1.0, 100.0, 1e4], [0.005])
    xs = [r.x_star_lambda for r in rows] + [rows[0].limit_target]
    assert xs == sorted(xs)
    assert [round(x, 4) for x in xs] == [0.2932, 0.3353, 0.3396, 0.3401]


def test_limit_selection():
    thr = conversion_threshold_coupon(table1_params())
    for c in (0.005, 0.01, 0.015, 0.018, 0.019, 0.025, 0.03):
        _, kind = classical_boundary(table1_params(1e4, c))
        assert kind == ("x*" if c <= thr else "sbar")
    for c in (0.001, 0.005, 0.01, 0.019, 0.02, 0.025, 0.03):
        assert boundary_sweep(table1_params(), [1e4], [c])[0].gap < 1e-3


def test_gap_to_classical_boundary_decays_like_inverse_sqrt_intensity():
    lams = [1e4, 1e5, 1e6, 1e7]
    for c in (0.005, 0.015, 0.018):
        gaps = [r.gap for r in boundary_sweep(table1_params(), lams, [c])]
        assert loglog_slope(lams, gaps) == pytest.approx(-0.5, abs=0.02)
    # the reference-table lambda = 1e4 cell and x* row already differ by 1.5e-3 at c = 0.015
    assert abs(TABLE1_REFERENCE[1e4][2] - 1.0203) > 1e-3


@pytest.mark.xfail(strict=True, reason="at lambda = 1e4 the gap is about 0.096 c for c below the "
                   "threshold coupon, so it exceeds 1e-3 once c > 0.0104")
def test_limit_gap_below_threshold_at_large_intensity():
    for c in (0.012, 0.015, 0.018):
        assert boundary_sweep(table1_params(), [1e4], [c])[0].gap < 1e-3


def test_classical_boundary_formula():
    p = table1_params(1.0, 0.005)
    a = exponents(p).alpha
    assert classical_boundary(p)[0] == pytest.approx(a / (a - 1) * 0.005 / (0.8 * 0.05), rel=1e-14)


def test_case1_rates():
    rep = rate_check_case1(table1_params(1.0, 0.04))
    for q in ("x", "A", "v"):
        errs = [rep.at(q, h).rel_error for h in (1e-2, 1e-3, 1e-4)]
        assert errs[-1] < 1e-3
        assert errs[-1] < errs[0]
    assert rep.loglog_slope == pytest.approx(1.0, abs=0.01)
    assert rep.at("x", 1e-4).exact == pytest.approx(-(0.05 - 0.03) * 1.25)


def test_case1_slope_of_threshold_by_hand():
    # sbar(h) = (q h + 1)/(r h + 1) K/gamma, so d/dh at 0 is (q - r) K/gamma
    rep = rate_check_case1(table1_params(1.0, 0.04), hs=(1e-6,))
    assert rep.at("x", 1e-6).fd_slope == pytest.approx((0.03 - 0.05) / 0.8, rel=1e-5)


def test_case2_rates():
    rep = rate_check_case2(table1_params(1.0, 0.06))
    assert rep.at("v", 1e-4).exact == pytest.approx(0.06 - 0.05)
    assert rep.at("v", 1e-4).rel_error < 1e-3
    with pytest.raises(KeyError):
        rep.at("x", 1e-4)


def test_rate_domain_errors():
    with pytest.raises(DomainError):
        rate_check_case1(table1_params(1.0, 0.02))
    with pytest.raises(DomainError):
        rate_check_case1(table1_params(1.0, 0.04), s_high=1.0)
    with pytest.raises(DomainError):
        rate_check_case2(table1_params(1.0, 0.04))


def test_loglog_slope_of_power_law():
    hs = np.geomspace(1e-4, 1e-1, 7)
    assert loglog_slope(hs, 3 * hs**2) == pytest.approx(2.0)


def test_table1_matches():
    t = reproduce_table1()
    assert t.ok
    for i, lam in enumerate(TABLE1_LAMBDAS):
        assert np.allclose(t.grid[i], TABLE1_REFERENCE[lam], atol=1e-3)
    assert t.limit_kind == ("x*", "x*", "x*", "sbar", "sbar", "sbar")
    assert t.x_star_row[0] == pytest.approx(0.3401, abs=5e-5)
    assert "0.8" in TABLE1_NOTE
    assert len(TABLE1_COUPONS) == 6


def test_table1_mismatch_raises():
    with pytest.raises(MismatchError):
        reproduce_table1(1e-9)
    t = reproduce_table1(1e-9, strict=False)
    assert not t.ok and len(t.mismatches) > 0


def test_price_gap_decreasing():
    for c in (0.005, 0.02, 0.04):
        gaps = price_gap_profile(table1_params(1.0, c))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_figure_data_shape():
    header, rows, markers = figure_data(base_params(), lambdas=(1.0, 100.0), n=30)
    assert header == ["s", "v_lambda=1", "v_lambda=100", "v_classical"]
    assert rows.shape == (30, 4)
    assert markers[-1][0] == math.inf
    assert np.all(rows[:, 1] <= rows[:, 2] + 1e-12)
    assert np.all(rows[:, 2] <= rows[:, 3] + 1e-12)
