"""Conversion boundary of the low-coupon regime (c <= qK).

The boundary ``x`` solves a four-term algebraic equation whose raw polynomial
form carries powers ``x**(beta_plus - beta_minus)``; for large intensities that
exponent is in the thousands.  Everything below works with the rescaled form,
i.e. the raw polynomial divided by ``sbar**(beta_plus - beta_minus)``, in the
variable ``y = x / sbar`` in (0, 1], where the large power only underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, DomainError, PastingViolation
from .model import ModelParams, Regime, classify_regime, exponents, threshold_sbar

PASTING_RTOL = 1e-8


@dataclass(frozen=True)
class BoundaryCoefficients:
    """Coefficients of ``C1 x^(d+1) + C2 x^d + C3 x + C4 = 0`` with ``d = beta+ - beta-``.

    ``C3`` and ``C4`` contain ``sbar**d`` and overflow to ``inf`` for very large
    intensities; they are reported for inspection only.
    """

    C1: float
    C2: float
    C3: float
    C4: float


def boundary_coefficients(p: ModelParams) -> BoundaryCoefficients:
    e = exponents(p)
    a, bp, bm = e.alpha, e.beta_plus, e.beta_minus
    lam, q, r, c, g = p.lam, p.q, p.r, p.c, p.gamma
    try:
        scale = threshold_sbar(p) ** (bp - bm)
    except OverflowError:
        scale = math.inf
    C1 = (a - lam / (q + lam) - q / (q + lam) * bp) * g
    C2 = -(a * c / r - c / (r + lam) * bp)
    C3 = -(a - lam / (q + lam) - q / (q + lam) * bm) * scale * g
    C4 = (a * c / r - c / (r + lam) * bm) * scale
    return BoundaryCoefficients(C1, C2, C3, C4)


def polynomial_residual(p: ModelParams, x: float) -> float:
    """Raw four-term polynomial; only usable while ``x**d`` stays finite."""
    e = exponents(p)
    C = boundary_coefficients(p)
    d = e.beta_plus - e.beta_minus
    return C.C1 * x ** (d + 1) + C.C2 * x**d + C.C3 * x + C.C4


def _terms(p: ModelParams, x: float, log_y: float):
    e = exponents(p)
    a, bp, bm = e.alpha, e.beta_plus, e.beta_minus
    lam, q, r, c, g = p.lam, p.q, p.r, p.c, p.gamma
    d = bp - bm
    y_d = math.exp(d * log_y) if log_y < 0 else 1.0
    m = q / (q + lam) * g * x - c / (r + lam)
    lin = (a - lam / (q + lam)) * g * x
    second = lin - a * c / r - bp * m
    value = (y_d - 1.0) * second - d * m
    scale = max(abs(lin), a * c / r, abs(bp * m), abs(d * m), abs(second), 1e-300)
    return value, scale


def boundary_residual(p: ModelParams, x: float) -> float:
    """Rescaled free-boundary equation evaluated at ``x`` in (0, sbar]."""
    sb = threshold_sbar(p)
    if not (x > 0) or x > sb * (1 + 1e-15):
        raise DomainError(f"x must lie in (0, {sb}], got {x}")
    return _terms(p, x, math.log(min(x / sb, 1.0)))[0]


def _residual_y(p: ModelParams, sb: float, y: float) -> float:
    return _terms(p, y * sb, math.log(y))[0]


def _probe_grid(p: ModelParams, sb: float, n_probe: int):
    lo = 1e-12
    # the residual is positive as x -> 0+; push the first probe down until it shows
    while _residual_y(p, sb, lo) <= 0 and lo > 1e-280:
        lo *= 1e-12
    ys = np.geomspace(lo, 1.0, n_probe)
    ys[-1] = 1.0
    vals = np.array([_residual_y(p, sb, y) for y in ys])
    # the tie c = qK puts an exact zero at y = 1; do not let rounding flip its sign
    if abs(vals[-1]) <= 1e-13 * _terms(p, sb, 0.0)[1]:
        vals[-1] = 0.0
    return ys, vals


def count_sign_changes(p: ModelParams, n_probe: int = 512) -> int:
    """Sign changes (positive to non-positive or back) of the residual on a probe of (0, sbar]."""
    sb = threshold_sbar(p)
    _, vals = _probe_grid(p, sb, n_probe)
    pos = vals > 0
    return int(np.count_nonzero(pos[:-1] != pos[1:]))


def _bracket_solve(f, lo: float, hi: float, flo: float, fhi: float, width: float,
                   max_iter: int = 400) -> tuple[float, float, float]:
    """Illinois false position with forced bisection; keeps ``f(lo) > 0 >= f(hi)``."""
    side = 0
    for it in range(max_iter):
        if hi - lo <= width:
            break
        if it % 4 == 3:
            mid = 0.5 * (lo + hi)
        else:
            mid = hi - fhi * (hi - lo) / (fhi - flo)
            if not lo < mid < hi:
                mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm > 0:
            lo, flo = mid, fm
            if side == 1:
                fhi *= 0.5
            side = 1
        else:
            hi, fhi = mid, fm
            if side == -1:
                flo *= 0.5
            side = -1
        if fm == 0.0:
            lo = hi = mid
            break
    # pick whichever end has the smaller residual
    root = lo if abs(f(lo)) < abs(f(hi)) else hi
    return root, lo, hi


@dataclass(frozen=True)
class BoundaryRoot:
    x_star: float
    residual: float
    bracket: tuple[float, float]
    sign_changes: int
    at_threshold: bool


def locate_conversion_boundary(p: ModelParams, n_probe: int = 64) -> BoundaryRoot:
    """Bracket the first sign change on a log-spaced probe of ``y = x/sbar``, then refine to 1e-13."""
    if classify_regime(p) is not Regime.CASE_III:
        raise DomainError(f"conversion boundary only exists for c <= qK (c={p.c}, qK={p.q * p.K})")
    sb = threshold_sbar(p)
    ys, vals = _probe_grid(p, sb, n_probe)
    pos = vals > 0
    n_changes = int(np.count_nonzero(pos[:-1] != pos[1:]))
    hits = np.flatnonzero(pos[:-1] & ~pos[1:])
    if len(hits) == 0:
        raise BracketError(
            f"no sign change of the boundary residual on (0, sbar] for lambda={p.lam}, c={p.c}")
    k = int(hits[0])
    if vals[k + 1] == 0.0:
        y = lo = hi = float(ys[k + 1])
    else:
        f = lambda t: _residual_y(p, sb, t)  # noqa: E731
        y, lo, hi = _bracket_solve(f, float(ys[k]), float(ys[k + 1]), float(vals[k]),
                                   float(vals[k + 1]), 1e-13)
    res = 0.0 if y == 1.0 and vals[-1] == 0.0 else _residual_y(p, sb, y)
    return BoundaryRoot(y * sb, res, (lo * sb, hi * sb), n_changes, y == 1.0)


def solve_conversion_boundary(p: ModelParams, n_probe: int = 64) -> float:
    """Holder's conversion boundary ``x*`` in (0, sbar] for the low-coupon regime.

    Raises :class:`BracketError` when no sign change is found, which signals an
    inconsistency between parameters and regime.
    """
    return locate_conversion_boundary(p, n_probe).x_star


@dataclass(frozen=True)
class PastingReport:
    x_star: float
    derivative_left: float
    derivative_right: float
    mismatch: float
    slope_below_gamma: bool
    lower_convex: bool
    upper_concave: bool
    below_payoff: bool
    degenerate: bool

    @property
    def ok(self) -> bool:
        return (self.mismatch <= PASTING_RTOL and self.slope_below_gamma and self.lower_convex
                and self.upper_concave and self.below_payoff)

    def failures(self) -> list[str]:
        out = []
        if not self.mismatch <= PASTING_RTOL:
            out.append(f"|v'(x-) - v'(x+)|/gamma = {self.mismatch:.3e} > {PASTING_RTOL:g}")
        if not self.slope_below_gamma:
            out.append(f"v'(x*) = {self.derivative_left:.6g} >= gamma")
        if not self.lower_convex:
            out.append("lower piece not convex")
        if not self.upper_concave:
            out.append("upper piece not concave")
        if not self.below_payoff:
            out.append("v > gamma*s somewhere on (x*, sbar]")
        return out


def verify_smooth_pasting(p: ModelParams, x_star: float, *, n_sample: int = 100,
                          strict: bool = True) -> PastingReport:
    """Check C1 fit at ``x_star`` and the shape facts that justify it.

    When ``x_star`` equals ``sbar`` (the tie ``c = qK``) there is no upper
    piece: the derivative match is vacuous and reported as zero mismatch.
    """
    from .analytic import build_constrained_solution, derivatives

    sol = build_constrained_solution(p, x_star=x_star)
    g = p.gamma
    sb = sol.sbar
    degenerate = x_star >= sb
    _, dl, _ = derivatives(sol, x_star, side="left")
    if degenerate:
        dr, mismatch = math.nan, 0.0
    else:
        _, dr, _ = derivatives(sol, x_star, side="right")
        mismatch = abs(dl - dr) / g

    lower = np.linspace(x_star * 1e-3, x_star, n_sample + 1)[:-1]
    _, _, d2_low = derivatives(sol, lower)
    lower_convex = bool(np.all(d2_low > 0))
    if degenerate:
        upper_concave = below = True
    else:
        upper = np.linspace(x_star, sb, n_sample + 2)[1:-1]
        v_up, _, d2_up = derivatives(sol, upper)
        upper_concave = bool(np.all(d2_up < 0))
        below = bool(np.all(v_up <= g * upper * (1 + 1e-12)))
    rep = PastingReport(x_star, dl, dr, mismatch, bool(dl < g), lower_convex, upper_concave,
                        below, degenerate)
    if strict and not rep.ok:
        raise PastingViolation(rep.failures())
    return rep
