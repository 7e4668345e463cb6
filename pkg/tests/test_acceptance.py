"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

The lines are repeated in the "acceptance criteria" section of the pytest
terminal summary.
"""

import math
import time

import numpy as np
import pytest

from poissoncb.analytic import build_constrained_solution, price_constrained
from poissoncb.asymptotics import (TABLE1_COUPONS, TABLE1_LAMBDAS, TABLE1_REFERENCE, TABLE1_NOTE,
                                   rate_check_case1, rate_check_case2, reproduce_table1,
                                   table1_params)
from poissoncb.boundary import solve_conversion_boundary, verify_smooth_pasting
from poissoncb.game.diagnostics import martingale_diagnostic, saddle_check
from poissoncb.game.lattice import LatticeConfig, lattice_value
from poissoncb.game.montecarlo import simulate_value
from poissoncb.game.strategies import optimal_strategy
from poissoncb.model import (ModelParams, Regime, classify_regime, conversion_threshold_coupon,
                             lower_bound, upper_bound)
from poissoncb.oracle import compare_to_analytic, solve_penalized_ode

REGIME_COUPONS = {"CaseI": 0.04, "CaseII": 0.06, "CaseIII": 0.02}
MONOTONE_LAMBDAS = (0.1, 0.5, 1.0, 5.0, 10.0, 100.0, 1e4)


def test_c1_table1(acceptance_log):
    t0 = time.perf_counter()
    table = reproduce_table1(strict=False)
    elapsed = time.perf_counter() - t0
    worst = max(abs(table.grid[i, j] - TABLE1_REFERENCE[lam][j])
                for i, lam in enumerate(TABLE1_LAMBDAS) for j in range(len(TABLE1_COUPONS)))
    p = table1_params()
    threshold = conversion_threshold_coupon(p)
    limits_ok = all((kind == "x*") == (c <= threshold)
                    for kind, c in zip(table.limit_kind, TABLE1_COUPONS))
    header_ok = "gamma = 0.8" in TABLE1_NOTE and "gamma = 1" in TABLE1_NOTE
    ok = table.ok and limits_ok and header_ok and elapsed < 5.0
    acceptance_log("C1 reference boundary table", ok,
                   f"max |cell - reference| = {worst:.2e} (tol 1e-3), {len(table.mismatches)} "
                   f"mismatches, limit split at c = {threshold:.4f}, {elapsed:.3f}s")
    assert ok


def test_c2_oracle_equivalence(acceptance_log):
    t0 = time.perf_counter()
    details, ok = [], True
    for name, c in REGIME_COUPONS.items():
        p = table1_params(1.0, c)
        sol = build_constrained_solution(p)
        fine = solve_penalized_ode(p, 2000)
        coarse = solve_penalized_ode(p, 1000, fine.s_min)
        rep = compare_to_analytic(fine, sol, coarse)
        good = rep.sup_error <= 1e-3
        if name == "CaseII":
            # the constant solves the scheme exactly; the error is rounding only
            good = good and rep.sup_error <= 1e-10
            details.append(f"{name} sup={rep.sup_error:.1e} (exact)")
        else:
            good = good and abs(rep.order - 2.0) <= 0.3
            details.append(f"{name} sup={rep.sup_error:.1e} order={rep.order:.3f}")
        ok = ok and good
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 10.0
    acceptance_log("C2 oracle equivalence", ok, ", ".join(details) + f", {elapsed:.2f}s")
    assert ok


def test_c3_game_value_triangle(acceptance_log):
    t0 = time.perf_counter()
    details, ok = [], True
    cfg = LatticeConfig(dt=2.5e-3, tol=1e-4)
    for name, c in REGIME_COUPONS.items():
        p = table1_params(1.0, c)
        assert math.exp(-p.r * cfg.resolve(p).horizon) * p.K <= 1e-4
        v = price_constrained(build_constrained_solution(p), 1.0)
        lat = lattice_value(p, cfg, 1.0)
        mc = simulate_value(p, 1.0, optimal_strategy(p), 200_000, seed=42)
        z = (mc.estimate - v) / mc.std_error
        good = abs(lat - v) <= 5e-3 and abs(z) <= 3.0
        ok = ok and good
        details.append(f"{name} |lattice-v|={abs(lat - v):.1e} MC z={z:+.2f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120.0
    acceptance_log("C3 game-value triangle", ok, ", ".join(details) + f", {elapsed:.1f}s")
    assert ok


def test_c4_saddle(acceptance_log):
    p = table1_params(1.0, 0.02)
    rep = saddle_check(p, 1.0, 200_000, seed=42)
    worst_inv = max((d.gap / d.paired_se if d.paired_se > 0 else 0.0)
                    for d in rep.deviations if d.player == "investor")
    worst_firm = min((d.gap / d.paired_se if d.paired_se > 0 else 0.0)
                     for d in rep.deviations if d.player == "firm")
    acceptance_log("C4 saddle property", rep.ok,
                   f"optimal={rep.optimal:.5f}, max investor gap/SE={worst_inv:+.2f} (<= 3), "
                   f"min firm gap/SE={worst_firm:+.2f} (>= -3)")
    assert rep.ok


def test_c5_martingale(acceptance_log):
    p = table1_params(1.0, 0.02)
    rep = martingale_diagnostic(p, 1.0, 200_000, seed=42)
    acceptance_log("C5 martingale diagnostic", rep.ok,
                   f"optimal t={rep.optimal.t_stat:+.2f}; investor waits to T_M: drift "
                   f"{rep.investor_late.mean_drift:+.1e} (paired t={rep.investor_late.paired_t:+.2f}); "
                   f"firm calls at T_1: drift {rep.firm_early.mean_drift:+.1e} "
                   f"(t={rep.firm_early.t_stat:+.1f})")
    assert rep.ok


def test_c6_asymptotic_rates(acceptance_log):
    r1 = rate_check_case1(table1_params(1.0, 0.04))
    r2 = rate_check_case2(table1_params(1.0, 0.06))
    errs = {q: r1.at(q, 1e-4).rel_error for q in ("x", "A", "v")}
    errs["v2"] = r2.at("v", 1e-4).rel_error
    ok = abs(r1.loglog_slope - 1.0) <= 0.05 and all(e <= 0.01 for e in errs.values())
    acceptance_log("C6 asymptotic rates", ok,
                   f"log-log slope={r1.loglog_slope:.4f}; rel errors at h=1e-4: "
                   + ", ".join(f"{k}={v:.1e}" for k, v in errs.items()))
    assert ok


def _random_params(rng) -> ModelParams:
    q = rng.uniform(0.005, 0.08)
    r = q + rng.uniform(0.002, 0.08)
    K = rng.uniform(0.5, 2.0)
    return ModelParams(r=r, q=q, sigma=rng.uniform(0.05, 0.6), lam=10 ** rng.uniform(-1, 4),
                       c=rng.uniform(0.2 * q * K, 1.5 * r * K), K=K, gamma=rng.uniform(0.2, 1.0))


def test_c7a_bounds_random(acceptance_log):
    rng = np.random.default_rng(20240601)
    violations = 0
    for _ in range(10_000):
        p = _random_params(rng)
        sol = build_constrained_solution(p)
        s = rng.uniform(0.01, 1.5) * sol.sbar
        v = price_constrained(sol, s)
        lo, up = lower_bound(p, s), upper_bound(p)
        tol = 1e-9 * max(1.0, abs(v))
        violations += not (lo - tol <= v <= max(lo, up) + tol)
    ok = violations == 0
    acceptance_log("C7a bounds on 1e4 random draws", ok, f"{violations} violations")
    assert ok


def test_c7b_lambda_monotonicity(acceptance_log):
    bad = []
    spots = np.linspace(0.05, 1.2, 24)
    for c in TABLE1_COUPONS:
        xs = [solve_conversion_boundary(table1_params(lam, c)) for lam in MONOTONE_LAMBDAS]
        if any(b < a - 1e-12 for a, b in zip(xs, xs[1:])):
            bad.append(f"x* column c={c}")
        prices = [price_constrained(build_constrained_solution(table1_params(lam, c)), spots)
                  for lam in MONOTONE_LAMBDAS]
        if any(np.any(b < a - 1e-12) for a, b in zip(prices, prices[1:])):
            bad.append(f"price column c={c}")
    ok = not bad
    acceptance_log("C7b lambda-monotonicity", ok,
                   f"{len(TABLE1_COUPONS)} coupons x {len(MONOTONE_LAMBDAS)} intensities, "
                   + ("all non-decreasing" if ok else "violations: " + ", ".join(bad)))
    assert ok


def _pasting_reports():
    out = {}
    for lam in TABLE1_LAMBDAS:
        for c in TABLE1_COUPONS:
            p = table1_params(lam, c)
            out[(lam, c)] = verify_smooth_pasting(p, solve_conversion_boundary(p), strict=False)
    return out


def test_c7c_smooth_pasting_fit(acceptance_log):
    reps = _pasting_reports()
    worst = max(r.mismatch for r in reps.values())
    ok = all(r.mismatch <= 1e-8 and r.slope_below_gamma and r.lower_convex and r.below_payoff
             for r in reps.values())
    acceptance_log("C7c smooth pasting (C1 fit, v'(x*) < gamma, lower convexity, v <= gamma s)",
                   ok, f"18 cells, max relative derivative mismatch {worst:.1e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the upper piece is convex, not concave, on (x*, sbar) for "
                   "every non-degenerate reference-table cell; see the decisions ledger")
def test_c7d_upper_piece_concavity(acceptance_log):
    reps = _pasting_reports()
    failing = sorted(k for k, r in reps.items() if not r.upper_concave)
    ok = not failing
    acceptance_log("C7d upper-piece concavity sampling", ok,
                   f"{len(failing)}/18 cells have v'' > 0 on (x*, sbar); only the tie column "
                   f"c = qK (no upper piece) passes")
    assert ok


def test_regimes_used_by_criteria():
    assert [classify_regime(table1_params(1.0, c)).value for c in REGIME_COUPONS.values()] == \
        [Regime.CASE_I.value, Regime.CASE_II.value, Regime.CASE_III.value]
