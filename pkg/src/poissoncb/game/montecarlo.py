"""Monte Carlo evaluation of the bond payoff under given stopping rules.

The spot is sampled exactly at the Poisson arrivals.  Whether it touched
``sbar`` between two arrivals is decided with the Brownian-bridge crossing
probability of the log-price, so ``T_M`` (first arrival at or after the
hitting time) is exact in law without a monitoring grid.

Paths are generated in fixed-size batches; batch ``b`` draws from
``SeedSequence([seed, b])`` and every batch draws the same number of variates
per arrival whatever the rules do.  The outcome is therefore a function of
``(seed, n_paths, batch_size)`` only: independent of worker scheduling and
identical for every strategy pair evaluated on the same call (common random
numbers).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import SeedError
from ..model import ModelParams, lower_bound, threshold_sbar, upper_bound
from .strategies import StrategyPair

BATCH_SIZE = 8192
TRUNCATION_TOL = 1e-4
THREADS_ENV = "POISSONCB_THREADS"
ALIVE, CONVERTED, CALLED, TRUNCATED = 0, 1, 2, 3


@dataclass(frozen=True)
class SimulationReport:
    strategy: str
    estimate: float
    std_error: float
    n_paths: int
    frac_convert: float
    frac_call: float
    frac_truncated: float
    seed: int
    horizon: float = field(default=math.nan)

    def as_row(self) -> dict:
        return {"strategy": self.strategy, "estimate": self.estimate, "std_error": self.std_error,
                "frac_convert": self.frac_convert, "frac_call": self.frac_call,
                "frac_truncated": self.frac_truncated}


@dataclass
class PathOutcomes:
    """Per-path results of one simulation, one row per strategy pair."""

    payoff: np.ndarray
    kind: np.ndarray
    drift: np.ndarray | None = None
    step_sum: np.ndarray | None = None
    step_sq: np.ndarray | None = None
    step_count: np.ndarray | None = None


def horizon_cap(p: ModelParams, tol: float = TRUNCATION_TOL) -> float:
    """Smallest ``T`` with ``exp(-r T) U <= tol``."""
    return max(math.log(upper_bound(p) / tol) / p.r, 0.0)


def _n_threads(n_workers: int | None) -> int:
    if n_workers is not None:
        return max(1, int(n_workers))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _batch(p: ModelParams, s0: float, pairs: Sequence[StrategyPair], n: int, seed: int,
           b: int, T_max: float, value_fn: Callable | None, n_steps_rec: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
    sb = threshold_sbar(p)
    U = upper_bound(p)
    nu = p.r - p.q - 0.5 * p.sigma**2
    s2 = p.sigma**2
    k = len(pairs)
    S = np.full(n, float(s0))
    T = np.zeros(n)
    hit = np.full(n, s0 >= sb)
    payoff = np.full((k, n), np.nan)
    kind = np.zeros((k, n), np.int8)
    track = value_fn is not None
    if track:
        y_prev = np.full((k, n), float(value_fn(np.array([s0]))[0]))
        drift = np.zeros((k, n))
        step_sum = np.zeros((k, n_steps_rec))
        step_sq = np.zeros((k, n_steps_rec))
        step_cnt = np.zeros((k, n_steps_rec))
    index = 0
    while (kind == ALIVE).any():
        index += 1
        tau = rng.exponential(1.0 / p.lam, n)
        z = rng.standard_normal(n)
        u = rng.random(n)
        Tn = T + tau
        Sn = S * np.exp(nu * tau + p.sigma * np.sqrt(tau) * z)
        below = ~hit & (Sn < sb)
        with np.errstate(divide="ignore", over="ignore"):
            cross = np.exp(-2.0 * np.log(sb / S) * np.log(sb / Sn) / (s2 * tau))
        hit_n = hit | (Sn >= sb) | (below & (u < cross))
        disc = np.exp(-p.r * Tn)
        coupons = p.c * (1.0 - disc) / p.r
        trunc = Tn > T_max
        clamp = np.clip(p.c / p.r, lower_bound(p, Sn), U)
        for i, pair in enumerate(pairs):
            alive = kind[i] == ALIVE
            if not alive.any():
                continue
            inv = pair.investor.fires(index, Tn, Sn, hit_n) | hit_n
            firm = pair.firm.fires(index, Tn, Sn, hit_n)
            stopped = (inv | firm) & alive & ~trunc
            leg = np.where(inv, p.gamma * Sn, p.K)
            payoff[i] = np.where(stopped, coupons + disc * leg, payoff[i])
            kind[i] = np.where(stopped, np.where(inv, CONVERTED, CALLED), kind[i])
            cut = alive & trunc
            payoff[i] = np.where(cut, coupons + disc * clamp, payoff[i])
            kind[i] = np.where(cut, TRUNCATED, kind[i])
            if track:
                y = np.where(alive & ~stopped & ~cut, coupons + disc * value_fn(Sn), payoff[i])
                d = np.where(alive, y - y_prev[i], 0.0)
                drift[i] += d
                y_prev[i] = np.where(alive, y, y_prev[i])
                if index <= n_steps_rec:
                    step_sum[i, index - 1] = d[alive].sum()
                    step_sq[i, index - 1] = (d[alive] ** 2).sum()
                    step_cnt[i, index - 1] = alive.sum()
        S, T, hit = Sn, Tn, hit_n
    if track:
        return PathOutcomes(payoff, kind, drift, step_sum, step_sq, step_cnt)
    return PathOutcomes(payoff, kind)


def simulate_paths(p: ModelParams, s0: float, pairs: Sequence[StrategyPair], n_paths: int,
                   seed: int = 42, *, n_workers: int | None = None, batch_size: int = BATCH_SIZE,
                   value_fn: Callable | None = None, n_steps_rec: int = 20,
                   tol: float = TRUNCATION_TOL) -> PathOutcomes:
    """Evaluate every pair in ``pairs`` on one common set of paths."""
    if n_paths is None or int(n_paths) < 1:
        raise SeedError(f"need at least one path, got {n_paths}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise SeedError(f"seed must be a non-negative integer, got {seed!r}")
    if not s0 > 0:
        raise SeedError(f"s0 must be positive, got {s0}")
    n_paths = int(n_paths)
    T_max = horizon_cap(p, tol)
    sizes = [min(batch_size, n_paths - lo) for lo in range(0, n_paths, batch_size)]

    def run(b):
        return _batch(p, s0, pairs, sizes[b], int(seed), b, T_max, value_fn, n_steps_rec)

    workers = _n_threads(n_workers)
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    out = PathOutcomes(np.concatenate([q.payoff for q in parts], axis=1),
                       np.concatenate([q.kind for q in parts], axis=1))
    if value_fn is not None:
        out.drift = np.concatenate([q.drift for q in parts], axis=1)
        out.step_sum = sum(q.step_sum for q in parts)
        out.step_sq = sum(q.step_sq for q in parts)
        out.step_count = sum(q.step_count for q in parts)
    return out


def _report(label: str, payoff: np.ndarray, kind: np.ndarray, seed: int, T_max: float):
    n = payoff.size
    return SimulationReport(
        strategy=label,
        estimate=float(payoff.mean()),
        std_error=float(payoff.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        n_paths=n,
        frac_convert=float(np.mean(kind == CONVERTED)),
        frac_call=float(np.mean(kind == CALLED)),
        frac_truncated=float(np.mean(kind == TRUNCATED)),
        seed=int(seed),
        horizon=T_max,
    )


def simulate_value(p: ModelParams, s0: float, strat: StrategyPair, n_paths: int, seed: int = 42,
                   *, n_workers: int | None = None, batch_size: int = BATCH_SIZE) -> SimulationReport:
    """Discounted payoff of the bond under ``strat``, averaged over ``n_paths`` paths."""
    out = simulate_paths(p, s0, [strat], n_paths, seed, n_workers=n_workers, batch_size=batch_size)
    return _report(strat.label, out.payoff[0], out.kind[0], seed, horizon_cap(p))
