"""Model parameters and the quantities derived directly from them.

Everything here is a pure function of :class:`ModelParams`.  The stock follows a
geometric Brownian motion with drift ``r - q`` and volatility ``sigma``; both
players of the bond game may act only at the arrivals of an independent Poisson
process of intensity ``lam``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Mapping

from .errors import DomainError

#: Parameter names as they appear in configuration files.
PARAM_KEYS = ("r", "q", "sigma", "lambda", "c", "K", "gamma")


def _violations(r, q, sigma, lam, c, K, gamma):
    out = []
    for name, value in (("r", r), ("q", q), ("sigma", sigma), ("lambda", lam),
                        ("c", c), ("K", K), ("gamma", gamma)):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or math.isnan(value):
            out.append(f"{name} must be a real number, got {value!r}")
    if out:
        return out
    if not r > q:
        out.append(f"r must exceed q (r={r}, q={q})")
    if not q > 0:
        out.append(f"q must be positive (q={q})")
    if not sigma > 0:
        out.append(f"sigma must be positive (sigma={sigma})")
    if not lam > 0:
        out.append(f"lambda must be positive (lambda={lam})")
    if not c > 0:
        out.append(f"c must be positive (c={c})")
    if not K > 0:
        out.append(f"K must be positive (K={K})")
    if not 0 < gamma <= 1:
        out.append(f"gamma must lie in (0, 1] (gamma={gamma})")
    if math.isinf(r) or math.isinf(sigma) or math.isinf(c) or math.isinf(K):
        out.append("r, sigma, c and K must be finite")
    return out


@dataclass(frozen=True)
class ModelParams:
    """Market and contract data.

    ``lam`` may be ``math.inf`` only through :meth:`with_lambda`; that value
    denotes the classical (unconstrained) bond and is accepted by the
    functions that have a well-defined limit.
    """

    r: float
    q: float
    sigma: float
    lam: float
    c: float
    K: float
    gamma: float

    def __post_init__(self):
        bad = _violations(self.r, self.q, self.sigma, self.lam, self.c, self.K, self.gamma)
        if bad:
            raise DomainError(bad)
        for f in ("r", "q", "sigma", "lam", "c", "K", "gamma"):
            object.__setattr__(self, f, float(getattr(self, f)))

    def with_lambda(self, lam: float) -> "ModelParams":
        return replace(self, lam=lam)

    def with_coupon(self, c: float) -> "ModelParams":
        return replace(self, c=c)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in PARAM_KEYS}


def validate_params(raw: Mapping) -> ModelParams:
    """Build :class:`ModelParams` from a key-value record.

    The record must carry exactly the seven keys of :data:`PARAM_KEYS`.  All
    problems are collected and reported together in one :class:`DomainError`.
    """
    keys = set(raw)
    problems = []
    unknown = sorted(keys - set(PARAM_KEYS))
    missing = [k for k in PARAM_KEYS if k not in keys]
    if unknown:
        problems.append("unknown keys: " + ", ".join(unknown))
    if missing:
        problems.append("missing keys: " + ", ".join(missing))
    if problems:
        raise DomainError(problems)
    vals = {k: raw[k] for k in PARAM_KEYS}
    bad = _violations(vals["r"], vals["q"], vals["sigma"], vals["lambda"],
                      vals["c"], vals["K"], vals["gamma"])
    if bad:
        raise DomainError(bad)
    return ModelParams(r=vals["r"], q=vals["q"], sigma=vals["sigma"], lam=vals["lambda"],
                       c=vals["c"], K=vals["K"], gamma=vals["gamma"])


def load_params(path) -> ModelParams:
    with open(Path(path), encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DomainError(f"{path}: expected a JSON object")
    return validate_params(raw)


class Regime(enum.Enum):
    """Coupon regime.

    ``CASE_I``: qK < c < rK, nobody acts before the threshold is hit.
    ``CASE_II``: c >= rK, the firm calls at the first arrival.
    ``CASE_III``: c <= qK, the holder converts above a free boundary.
    """

    CASE_I = "CaseI"
    CASE_II = "CaseII"
    CASE_III = "CaseIII"


def classify_regime(p: ModelParams) -> Regime:
    if p.c >= p.r * p.K:
        return Regime.CASE_II
    if p.c <= p.q * p.K:
        return Regime.CASE_III
    return Regime.CASE_I


@dataclass(frozen=True)
class Exponents:
    alpha_plus: float
    alpha_minus: float
    beta_plus: float
    beta_minus: float

    @property
    def alpha(self) -> float:
        return self.alpha_plus


def quadratic_roots(r: float, q: float, sigma: float, rate: float) -> tuple[float, float]:
    """Roots of ``sigma^2/2 a^2 + (r - q - sigma^2/2) a - rate = 0`` as (plus, minus).

    The root of larger magnitude is formed without cancellation and the other
    one recovered from the product ``-2 rate / sigma^2``.
    """
    s2 = sigma * sigma
    b = r - q - 0.5 * s2
    disc = math.sqrt(b * b + 2.0 * rate * s2)
    if b <= 0:
        plus = (-b + disc) / s2
        minus = -2.0 * rate / (s2 * plus)
    else:
        minus = (-b - disc) / s2
        plus = -2.0 * rate / (s2 * minus)
    return plus, minus


def exponents(p: ModelParams) -> Exponents:
    ap, am = quadratic_roots(p.r, p.q, p.sigma, p.r)
    bp, bm = quadratic_roots(p.r, p.q, p.sigma, p.r + p.lam)
    return Exponents(ap, am, bp, bm)


def sbar_of(r: float, q: float, K: float, gamma: float, lam: float) -> float:
    """Stopping threshold ``(q+lam)/(r+lam) * K/gamma``; ``lam=inf`` gives ``K/gamma``."""
    if math.isinf(lam):
        return K / gamma
    return (q + lam) / (r + lam) * K / gamma


def threshold_sbar(p: ModelParams) -> float:
    return sbar_of(p.r, p.q, p.K, p.gamma, p.lam)


def classical_sbar(p: ModelParams) -> float:
    return p.K / p.gamma


def lower_bound(p: ModelParams, s):
    """Value of converting at the first arrival: ``c/(r+lam) + lam/(q+lam) * gamma * s``."""
    return p.c / (p.r + p.lam) + p.lam / (p.q + p.lam) * p.gamma * s


def upper_bound(p: ModelParams) -> float:
    """Value of being called at the first arrival: ``(c + lam K)/(r + lam)``."""
    return (p.c + p.lam * p.K) / (p.r + p.lam)


def bounds(p: ModelParams, s):
    if (s <= 0) if isinstance(s, (int, float)) else bool((s <= 0).any()):
        raise DomainError(f"spot must be positive, got {s}")
    return lower_bound(p, s), upper_bound(p)


def conversion_threshold_coupon(p: ModelParams) -> float:
    """Coupon ``(alpha-1)/alpha * rK`` separating the two classical limits."""
    a = exponents(p).alpha
    return (a - 1.0) / a * p.r * p.K
