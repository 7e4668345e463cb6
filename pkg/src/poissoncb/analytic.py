"""Closed-form prices of the perpetual convertible bond.

Two families are provided:

* the constrained bond, where call and conversion happen only at Poisson
  arrivals (:func:`build_constrained_solution`, :func:`price_constrained`);
* the classical bond with continuous call/conversion, the large-intensity
  limit (:func:`build_classical_solution`, :func:`price_classical`).

Powers with the large exponents ``beta_plus``/``beta_minus`` are always taken
of ratios ``s/x`` and ``x/sbar`` that keep the combined exponent non-positive,
so nothing overflows even at intensities around 1e4; terms that underflow are
simply zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import (ModelParams, Exponents, Regime, classify_regime, exponents, quadratic_roots,
                    threshold_sbar, upper_bound)


@dataclass(frozen=True)
class AnalyticSolution:
    params: ModelParams
    regime: Regime
    sbar: float
    exponents: Exponents
    coeff_A: float
    coeff_B_plus: float
    coeff_B_minus: float
    x_star: float
    u_upper: float
    l_lower: tuple[float, float]  # (intercept, slope) of L(s)

    # normalized upper-piece data; not part of the serialized state
    _m: float = field(default=0.0, repr=False, compare=False)
    _y_d: float = field(default=1.0, repr=False, compare=False)
    _log_y: float = field(default=0.0, repr=False, compare=False)

    def __call__(self, s):
        return price_constrained(self, s)

    def to_dict(self) -> dict:
        e = self.exponents
        return {
            "params": self.params.to_dict(),
            "regime": self.regime.value,
            "sbar": self.sbar,
            "exponents": {"alpha_plus": e.alpha_plus, "alpha_minus": e.alpha_minus,
                          "beta_plus": e.beta_plus, "beta_minus": e.beta_minus},
            "coeff_A": self.coeff_A,
            "coeff_B_plus": self.coeff_B_plus,
            "coeff_B_minus": self.coeff_B_minus,
            "x_star": self.x_star,
            "u_upper": self.u_upper,
            "l_lower": list(self.l_lower),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyticSolution":
        from .model import validate_params

        p = validate_params({k: float(v) for k, v in d["params"].items()})
        e = Exponents(**{k: float(v) for k, v in d["exponents"].items()})
        return _assemble(p, Regime(d["regime"]), float(d["sbar"]), e, float(d["coeff_A"]),
                         float(d["coeff_B_plus"]), float(d["coeff_B_minus"]), float(d["x_star"]),
                         float(d["u_upper"]), tuple(float(v) for v in d["l_lower"]))


def _assemble(p, regime, sb, e, A, Bp, Bm, x, U, L):
    m, y_d, log_y = 0.0, 1.0, 0.0
    if regime is Regime.CASE_III and x < sb:
        log_y = math.log(x / sb)
        y_d = math.exp((e.beta_plus - e.beta_minus) * log_y)
        m = p.q / (p.q + p.lam) * p.gamma * x - p.c / (p.r + p.lam)
    return AnalyticSolution(p, regime, sb, e, A, Bp, Bm, x, U, L, m, y_d, log_y)


def _safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def build_constrained_solution(p: ModelParams, x_star: float | None = None) -> AnalyticSolution:
    """Assemble the piecewise closed form for the constrained bond.

    In the low-coupon regime the conversion boundary is solved for unless
    ``x_star`` is supplied (the smooth-pasting verifier passes perturbed values).
    """
    regime = classify_regime(p)
    e = exponents(p)
    sb = threshold_sbar(p)
    U = upper_bound(p)
    L = (p.c / (p.r + p.lam), p.lam / (p.q + p.lam) * p.gamma)
    a = e.alpha
    if regime is Regime.CASE_I:
        A = p.lam / (p.r + p.lam) * (p.r * p.K - p.c) / p.r * sb ** (-a)
        return _assemble(p, regime, sb, e, A, 0.0, 0.0, sb, U, L)
    if regime is Regime.CASE_II:
        return _assemble(p, regime, sb, e, 0.0, 0.0, 0.0, sb, U, L)

    if x_star is None:
        from .boundary import solve_conversion_boundary

        x_star = solve_conversion_boundary(p)
    x = float(x_star)
    A = x ** (-a) * (p.gamma * x - p.c / p.r)
    if x >= sb:
        return _assemble(p, regime, sb, e, A, 0.0, 0.0, sb, U, L)
    d = e.beta_plus - e.beta_minus
    log_y = math.log(x / sb)
    y_d = math.exp(d * log_y)
    m = p.q / (p.q + p.lam) * p.gamma * x - p.c / (p.r + p.lam)
    # B+ = m / (x^b+ - sbar^d x^b-),  B- = m / (x^b- - sbar^-d x^b+)
    Bp = -m / (1.0 - y_d) * _safe_exp(d * log_y - e.beta_plus * math.log(x))
    Bm = m / (1.0 - y_d) * _safe_exp(-e.beta_minus * math.log(x))
    return _assemble(p, regime, sb, e, A, Bp, Bm, x, U, L)


def _pieces(sol: AnalyticSolution, s: np.ndarray, piece: str | None = None):
    """Value, first and second derivative on the region below ``sbar``.

    ``piece`` forces the lower (``"lower"``) or upper (``"upper"``) branch of
    the low-coupon solution regardless of where ``s`` sits.
    """
    p, e = sol.params, sol.exponents
    a = e.alpha
    v = np.empty_like(s)
    d1 = np.empty_like(s)
    d2 = np.empty_like(s)
    if sol.regime is Regime.CASE_II:
        v[:] = sol.u_upper
        d1[:] = 0.0
        d2[:] = 0.0
        return v, d1, d2
    has_upper = sol.regime is Regime.CASE_III and sol.x_star < sol.sbar
    if not has_upper or piece == "lower":
        low = np.ones(s.shape, bool)
    elif piece == "upper":
        low = np.zeros(s.shape, bool)
    else:
        low = s < sol.x_star
    sl = s[low]
    pw = sol.coeff_A * np.exp(a * np.log(sl))
    v[low] = pw + p.c / p.r
    d1[low] = a * pw / sl
    d2[low] = a * (a - 1.0) * pw / sl**2
    up = ~low
    if up.any():
        su = s[up]
        bp, bm = e.beta_plus, e.beta_minus
        d = bp - bm
        lr = np.log(su / sol.x_star)
        # B+ s^b+ = m y^d/(y^d - 1) (s/x)^b+ and B- s^b- = m/(1 - y^d) (s/x)^b-;
        # the exponent d*log(y) + b+*log(s/x) is <= 0 for s <= sbar
        with np.errstate(over="ignore", under="ignore"):
            tp = -sol._m / (1.0 - sol._y_d) * np.exp(d * sol._log_y + bp * lr)
            tm = sol._m / (1.0 - sol._y_d) * np.exp(bm * lr)
        lam = p.lam
        slope = lam / (p.q + lam) * p.gamma
        v[up] = tp + tm + p.c / (p.r + lam) + slope * su
        d1[up] = (bp * tp + bm * tm) / su + slope
        d2[up] = (bp * (bp - 1.0) * tp + bm * (bm - 1.0) * tm) / su**2
    return v, d1, d2


def derivatives(sol: AnalyticSolution, s, side: str | None = None):
    """Return ``(v, v', v'')`` at ``s`` (scalar or array).

    ``side="left"``/``"right"`` evaluates the lower/upper branch of the
    low-coupon solution, which is how one-sided limits at ``x_star`` are taken.
    Above ``sbar`` the affine lower bound applies.
    """
    if side not in (None, "left", "right"):
        raise ValueError(f"side must be 'left', 'right' or None, got {side!r}")
    piece = {"left": "lower", "right": "upper", None: None}[side]
    scalar = np.ndim(s) == 0
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(arr <= 0):
        raise DomainError("spot must be positive")
    v = np.empty_like(arr)
    d1 = np.empty_like(arr)
    d2 = np.empty_like(arr)
    inside = arr < sol.sbar
    if piece is not None:
        inside = arr <= sol.sbar
    if inside.any():
        v[inside], d1[inside], d2[inside] = _pieces(sol, arr[inside], piece)
    out = ~inside
    if out.any():
        v[out] = sol.l_lower[0] + sol.l_lower[1] * arr[out]
        d1[out] = sol.l_lower[1]
        d2[out] = 0.0
    if scalar:
        return float(v[0]), float(d1[0]), float(d2[0])
    return v, d1, d2


def price_constrained(sol: AnalyticSolution, s):
    """Bond value at spot ``s``; ``L(s)`` at or above ``sbar``."""
    return derivatives(sol, s)[0]


@dataclass(frozen=True)
class ClassicalSolution:
    """Value of the bond when call and conversion are allowed at any time."""

    params: ModelParams
    regime: Regime
    sbar: float
    coeff: float
    x3: float
    alpha: float

    def __call__(self, s):
        return price_classical(self, s)


def build_classical_solution(p: ModelParams) -> ClassicalSolution:
    regime = classify_regime(p)
    a = quadratic_roots(p.r, p.q, p.sigma, p.r)[0]
    sb = p.K / p.gamma
    if regime is Regime.CASE_II:
        return ClassicalSolution(p, regime, sb, 0.0, sb, a)
    if regime is Regime.CASE_I:
        return ClassicalSolution(p, regime, sb, (p.r * p.K - p.c) / p.r * sb ** (-a), sb, a)
    if p.c <= (a - 1.0) / a * p.r * p.K:
        x3 = min(a / (a - 1.0) * p.c / (p.gamma * p.r), sb)
    else:
        x3 = sb
    return ClassicalSolution(p, regime, sb, (p.gamma * x3 - p.c / p.r) * x3 ** (-a), x3, a)


def price_classical(sol: ClassicalSolution, s):
    p = sol.params
    scalar = np.ndim(s) == 0
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(arr <= 0):
        raise DomainError("spot must be positive")
    if sol.regime is Regime.CASE_II:
        out = np.where(arr < sol.sbar, p.K, p.gamma * arr)
    else:
        below = arr < sol.x3
        with np.errstate(over="ignore"):
            power = sol.coeff * np.exp(sol.alpha * np.log(np.where(below, arr, sol.x3)))
        out = np.where(below, power + p.c / p.r, p.gamma * arr)
    return float(out[0]) if scalar else out
