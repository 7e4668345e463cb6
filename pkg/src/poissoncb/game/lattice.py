"""Backward induction on a trinomial log-price lattice.

Time runs in steps of ``dt`` up to a horizon ``T_max``.  Each step carries
one Poisson arrival with probability ``1 - exp(-lam dt)``; at an arrival the
node value becomes ``min(K, max(cont, gamma s))`` (or whatever a supplied
strategy pair dictates).  The top node sits exactly on ``sbar`` and is
absorbing with value ``U``.  Coupons accrue in closed form over each step and
the recursion is discounted per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError
from ..model import ModelParams, lower_bound, threshold_sbar, upper_bound
from .strategies import StrategyPair

MAX_ARRIVAL_PROB = 0.2


@dataclass(frozen=True)
class LatticeConfig:
    """Discretization knobs.

    ``horizon_cap=None`` picks the smallest ``T_max`` with
    ``exp(-r T_max) K <= tol``; ``dt`` is then shrunk slightly so that
    ``n_time * dt == T_max``.
    """

    dt: float = 2.5e-3
    horizon_cap: float | None = None
    tol: float = 1e-4
    log_span: float = 12.0
    n_space: int | None = None

    def resolve(self, p: ModelParams) -> "ResolvedLattice":
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if p.lam * self.dt >= MAX_ARRIVAL_PROB:
            raise ConfigError(f"lambda*dt = {p.lam * self.dt:g} must stay below {MAX_ARRIVAL_PROB}")
        if self.horizon_cap is None:
            T = math.log(p.K / self.tol) / p.r
        else:
            T = float(self.horizon_cap)
            bound = math.exp(-p.r * T) * p.K
            if bound > self.tol:
                raise ConfigError(f"truncation bound exp(-r T_max) K = {bound:.3g} exceeds "
                                  f"tolerance {self.tol:g}")
        n_time = max(1, math.ceil(T / self.dt - 1e-9))
        return ResolvedLattice(T / n_time, n_time, T, self.log_span, self.n_space)


@dataclass(frozen=True)
class ResolvedLattice:
    dt: float
    n_time: int
    horizon: float
    log_span: float
    n_space: int | None


def _grid(p: ModelParams, cfg: ResolvedLattice, s0: float):
    sb = threshold_sbar(p)
    h0 = p.sigma * math.sqrt(3.0 * cfg.dt)
    dist = math.log(sb / s0)
    k = math.floor(dist / h0 + 1e-12)
    h = dist / k if k >= 1 else h0
    n = cfg.n_space if cfg.n_space is not None else int(math.ceil(cfg.log_span / h)) + 1
    n = max(n, k + 3)
    z = math.log(sb) - h * np.arange(n)
    return z, h, (k if k >= 1 else None)


def lattice_value(p: ModelParams, cfg: LatticeConfig | None = None, s0: float = 1.0,
                  strategy: StrategyPair | None = None) -> float:
    """Game value at time 0 and spot ``s0 < sbar``.

    With ``strategy=None`` both players act optimally at every arrival;
    otherwise the given pair is evaluated.
    """
    cfg = (cfg or LatticeConfig()).resolve(p)
    sb = threshold_sbar(p)
    if not 0 < s0 < sb:
        raise DomainError(f"s0 must lie in (0, sbar={sb:.6g}), got {s0}")
    z, h, k = _grid(p, cfg, s0)
    s = np.exp(z)
    s[0] = sb
    dt = cfg.dt
    nu = p.r - p.q - 0.5 * p.sigma**2
    a = (p.sigma**2 * dt + nu**2 * dt**2) / h**2
    pu = 0.5 * (a + nu * dt / h)
    pd = 0.5 * (a - nu * dt / h)
    pm = 1.0 - pu - pd
    if min(pu, pd, pm) < 0:
        raise ConfigError("negative transition probability; refine dt")
    U = upper_bound(p)
    disc = math.exp(-p.r * dt)
    coupon = p.c * (1.0 - disc) / p.r
    p_arr = -math.expm1(-p.lam * dt)
    gs = p.gamma * s

    if strategy is not None:
        no_hit = np.zeros(s.shape, bool)
        inv = strategy.investor.fires(1, None, s, no_hit)
        firm = strategy.firm.fires(1, None, s, no_hit)
    v = np.clip(np.full(s.shape, p.c / p.r), lower_bound(p, s), U)
    v[0] = U
    w = np.empty_like(v)
    for _ in range(cfg.n_time):
        if strategy is None:
            stop = np.minimum(p.K, np.maximum(v, gs))
        else:
            stop = np.where(inv, gs, np.where(firm, p.K, v))
        w[:] = v + p_arr * (stop - v)
        w[0] = U
        v[1:-1] = coupon + disc * (pu * w[:-2] + pm * w[1:-1] + pd * w[2:])
        # reflecting bottom edge
        v[-1] = coupon + disc * (pu * w[-2] + (pm + pd) * w[-1])
        v[0] = U
    if k is not None:
        return float(v[k])
    return float(np.interp(math.log(s0), z[::-1], v[::-1]))
