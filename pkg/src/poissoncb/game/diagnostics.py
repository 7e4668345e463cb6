"""Saddle-point and martingale checks built on the Monte Carlo engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..model import ModelParams, Regime, classify_regime, threshold_sbar
from .montecarlo import simulate_paths
from .strategies import (NeverBeforeTM, StopAtFirstArrival, StrategyPair, ThresholdConvert,
                         optimal_strategy)

N_SE = 3.0


@dataclass(frozen=True)
class Deviation:
    player: str  # "investor" or "firm"
    rule: str
    estimate: float
    gap: float  # deviation estimate minus optimal estimate
    paired_se: float

    @property
    def ok(self) -> bool:
        # the holder maximizes and the issuer minimizes the bond value
        if self.player == "investor":
            return self.gap <= N_SE * self.paired_se
        return self.gap >= -N_SE * self.paired_se


@dataclass(frozen=True)
class SaddleReport:
    optimal: float
    optimal_se: float
    x_star: float
    deviations: tuple[Deviation, ...]
    n_paths: int
    seed: int

    @property
    def ok(self) -> bool:
        return all(d.ok for d in self.deviations)


def deviation_roster(p: ModelParams, x_star: float | None = None):
    """Optimal pair followed by the unilateral deviations checked by :func:`saddle_check`."""
    if x_star is None:
        x_star = _x_star(p)
    opt = optimal_strategy(p, x_star if classify_regime(p) is Regime.CASE_III else None)
    roster = [("optimal", opt)]
    for rule in (StopAtFirstArrival(), NeverBeforeTM(),
                 ThresholdConvert(x=0.5 * x_star, name="ThresholdConvert(0.5x*)"),
                 ThresholdConvert(x=1.5 * x_star, name="ThresholdConvert(1.5x*)")):
        roster.append(("investor", StrategyPair(opt.firm, rule)))
    for rule in (StopAtFirstArrival(), NeverBeforeTM()):
        roster.append(("firm", StrategyPair(rule, opt.investor)))
    return roster


def _x_star(p: ModelParams) -> float:
    if classify_regime(p) is Regime.CASE_III:
        from ..boundary import solve_conversion_boundary

        return solve_conversion_boundary(p)
    return threshold_sbar(p)


def saddle_check(p: ModelParams, s0: float, n_paths: int, seed: int = 42, *,
                 n_workers: int | None = None) -> SaddleReport:
    """Score unilateral deviations from the optimal pair on common paths.

    Outside the low-coupon regime ``x*`` is taken as ``sbar`` for the
    threshold deviations.
    """
    x_star = _x_star(p)
    roster = deviation_roster(p, x_star)
    out = simulate_paths(p, s0, [pair for _, pair in roster], n_paths, seed, n_workers=n_workers)
    base = out.payoff[0]
    n = base.size
    devs = []
    for (player, pair), row in zip(roster[1:], out.payoff[1:]):
        diff = row - base
        se = float(diff.std(ddof=1) / math.sqrt(n))
        rule = pair.investor if player == "investor" else pair.firm
        devs.append(Deviation(player, rule.name, float(row.mean()), float(diff.mean()), se))
    return SaddleReport(float(base.mean()), float(base.std(ddof=1) / math.sqrt(n)), x_star,
                        tuple(devs), n, int(seed))


@dataclass(frozen=True)
class DriftReport:
    """Drift of ``Y_n = coupons to T_n + exp(-r T_n) * value at T_n`` along simulated play.

    ``mean_drift`` is the average of ``Y_end - Y_0`` per path and ``t_stat``
    its ratio to the standard error; ``step_drift`` holds the mean increment
    at each of the first few arrivals (over paths still in play).
    """

    strategy: str
    mean_drift: float
    std_error: float
    t_stat: float
    step_drift: tuple[float, ...]
    step_t: tuple[float, ...]
    n_paths: int
    paired_gap: float = 0.0  # mean of (Y_end - optimal Y_end) on common paths
    paired_t: float = 0.0


@dataclass(frozen=True)
class MartingaleReport:
    optimal: DriftReport
    investor_late: DriftReport   # investor waits for T_M: supermartingale expected
    firm_early: DriftReport      # firm calls at the first arrival: submartingale expected

    @property
    def ok(self) -> bool:
        """Optimal drift insignificant; deviations drift in the predicted direction."""
        return (abs(self.optimal.t_stat) < N_SE
                and self.investor_late.mean_drift <= 0 and self.investor_late.t_stat < N_SE
                and self.firm_early.mean_drift >= 0 and self.firm_early.t_stat > -N_SE)


def _drift(label, drift, s_sum, s_sq, s_cnt) -> DriftReport:
    n = drift.size
    mean = float(drift.mean())
    se = float(drift.std(ddof=1) / math.sqrt(n))
    t = mean / se if se > 0 else (0.0 if mean == 0 else math.copysign(math.inf, mean))
    with np.errstate(invalid="ignore", divide="ignore"):
        m = s_sum / s_cnt
        var = s_sq / s_cnt - m**2
        st = m / np.sqrt(np.maximum(var, 0) / s_cnt)
    keep = s_cnt > 1
    return DriftReport(label, mean, se, t, tuple(float(x) for x in m[keep]),
                       tuple(float(x) for x in st[keep]), n)


def martingale_diagnostic(p: ModelParams, s0: float, n_paths: int, seed: int = 42, *,
                          n_workers: int | None = None, n_steps: int = 20) -> MartingaleReport:
    """Drift of the discounted value process under optimal and deviated play.

    The closed-form value supplies ``v`` between stops; at the stopping
    arrival the realized payoff is used.
    """
    from ..analytic import build_constrained_solution, price_constrained

    sol = build_constrained_solution(p)
    opt = optimal_strategy(p, sol.x_star if sol.regime is Regime.CASE_III else None)
    pairs = [opt, StrategyPair(opt.firm, NeverBeforeTM()), StrategyPair(StopAtFirstArrival(), opt.investor)]
    out = simulate_paths(p, s0, pairs, n_paths, seed, n_workers=n_workers,
                         value_fn=lambda s: price_constrained(sol, s), n_steps_rec=n_steps)
    reps = []
    for i, pair in enumerate(pairs):
        rep = _drift(pair.label, out.drift[i], out.step_sum[i], out.step_sq[i], out.step_count[i])
        if i:
            diff = out.drift[i] - out.drift[0]
            gap = float(diff.mean())
            se = float(diff.std(ddof=1) / math.sqrt(diff.size))
            rep = replace(rep, paired_gap=gap, paired_t=gap / se if se > 0 else 0.0)
        reps.append(rep)
    return MartingaleReport(*reps)
