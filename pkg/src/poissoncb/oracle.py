"""Finite-difference solution of the penalized bond ODE.

The equation solved on ``(s_min, sbar)`` is

    -L0 v = c + lam (gamma s - v)^+ - lam (v - K)^+,
    L0 = 1/2 sigma^2 s^2 d2/ds2 + (r - q) s d/ds - r,

with Dirichlet data at both ends.  In ``z = ln s`` the generator has
constant coefficients, so a uniform ``z`` grid with central differences
gives a fixed tridiagonal stencil.  The two penalty terms are handled by
policy iteration: freeze the sets where each penalty is active, solve the
linear system, recompute the sets, repeat.  Nothing from the closed-form
pricer is used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, NoConvergence, ParamMismatch
from .model import ModelParams, Regime, classify_regime, exponents, threshold_sbar, upper_bound

MAX_POLICY_ITER = 200
POLICY_TOL = 1e-10
#: default lower end of the grid is ``sbar * exp(-DEFAULT_LOG_SPAN)``
DEFAULT_LOG_SPAN = 12.0


@dataclass(frozen=True)
class GridSolution:
    params: ModelParams
    nodes: np.ndarray
    values: np.ndarray
    regime: Regime
    iterations: int
    residual_norm: float
    convert_active: np.ndarray
    call_active: np.ndarray

    @property
    def s_min(self) -> float:
        return float(self.nodes[0])


def _stencil(p: ModelParams, h: float):
    s2 = p.sigma**2
    mu = p.r - p.q - 0.5 * s2
    lo = 0.5 * s2 / h**2 - 0.5 * mu / h
    up = 0.5 * s2 / h**2 + 0.5 * mu / h
    diag = s2 / h**2 + p.r
    return lo, diag, up


def solve_penalized_ode(p: ModelParams, n_nodes: int = 2000, s_min: float | None = None,
                        *, max_iter: int = MAX_POLICY_ITER, tol: float = POLICY_TOL) -> GridSolution:
    """Solve the penalized ODE on ``n_nodes`` log-spaced nodes from ``s_min`` to ``sbar``.

    The end values are ``c/r`` (or ``U`` when ``c >= rK``) at ``s_min`` and
    ``U`` at ``sbar``.
    """
    if n_nodes < 100:
        raise DomainError(f"n_nodes must be at least 100, got {n_nodes}")
    sb = threshold_sbar(p)
    if s_min is None:
        s_min = sb * math.exp(-DEFAULT_LOG_SPAN)
    if not 0 < s_min < sb:
        raise DomainError(f"s_min must lie in (0, {sb}), got {s_min}")
    regime = classify_regime(p)
    U = upper_bound(p)
    z = np.linspace(math.log(s_min), math.log(sb), n_nodes)
    z[-1] = math.log(sb)
    s = np.exp(z)
    s[-1] = sb
    h = z[1] - z[0]
    lo, diag, up = _stencil(p, h)

    left = U if regime is Regime.CASE_II else p.c / p.r
    si = s[1:-1]
    m = n_nodes - 2
    lam = p.lam
    gs = p.gamma * si

    v = np.empty(n_nodes)
    v[0], v[-1] = left, U
    # start from the no-penalty policy
    conv = np.zeros(m, bool)
    call = np.zeros(m, bool)
    prev = None
    for it in range(1, max_iter + 1):
        ab = np.zeros((3, m))
        ab[0, 1:] = -up
        ab[1, :] = diag + lam * (conv.astype(float) + call.astype(float))
        ab[2, :-1] = -lo
        rhs = np.full(m, p.c) + lam * (gs * conv + p.K * call)
        rhs[0] += lo * left
        rhs[-1] += up * U
        v[1:-1] = solve_banded((1, 1), ab, rhs)
        new_conv = v[1:-1] < gs
        new_call = v[1:-1] > p.K
        change = math.inf if prev is None else float(np.max(np.abs(v - prev)))
        if (np.array_equal(new_conv, conv) and np.array_equal(new_call, call)) or change < tol:
            conv, call = new_conv, new_call
            break
        conv, call = new_conv, new_call
        prev = v.copy()
    else:
        raise NoConvergence(f"policy iteration did not settle in {max_iter} iterations",
                            residual=change, iterations=max_iter)
    res = _residual(p, v, s, h)
    return GridSolution(p, s, v.copy(), regime, it, res, np.concatenate([[False], conv, [False]]),
                        np.concatenate([[False], call, [False]]))


def _residual(p: ModelParams, v: np.ndarray, s: np.ndarray, h: float) -> float:
    lo, diag, up = _stencil(p, h)
    vi = v[1:-1]
    si = s[1:-1]
    lhs = -lo * v[:-2] + diag * vi - up * v[2:]
    rhs = p.c + p.lam * np.maximum(p.gamma * si - vi, 0.0) - p.lam * np.maximum(vi - p.K, 0.0)
    return float(np.max(np.abs(lhs - rhs)))


def crossing_node(g: GridSolution) -> float:
    """Grid location where ``v - gamma s`` first turns non-positive, or ``nan``."""
    d = g.values - g.params.gamma * g.nodes
    idx = np.flatnonzero(d[:-1] <= 0)
    return float(g.nodes[idx[0]]) if len(idx) else math.nan


@dataclass(frozen=True)
class ErrorReport:
    sup_error: float
    l2_error: float
    order: float
    truncation_bound: float
    n_nodes: int
    coarse_sup_error: float


def _errors(g: GridSolution, sol) -> tuple[float, float]:
    from .analytic import price_constrained

    exact = price_constrained(sol, g.nodes[1:-1])
    diff = g.values[1:-1] - exact
    h = math.log(g.nodes[1] / g.nodes[0])
    return float(np.max(np.abs(diff))), float(math.sqrt(np.sum(diff**2) * h))


def compare_to_analytic(g: GridSolution, sol, coarse: GridSolution | None = None) -> ErrorReport:
    """Compare grid values with the closed form on interior nodes.

    When ``coarse`` is omitted, a second solve on about half as many nodes
    over the same interval supplies the convergence-order estimate.
    """
    if g.params != sol.params:
        raise ParamMismatch("grid solution and closed form were built from different parameters")
    if coarse is None:
        coarse = solve_penalized_ode(g.params, (len(g.nodes) + 1) // 2, g.s_min)
    elif coarse.params != g.params:
        raise ParamMismatch("coarse grid was built from different parameters")
    sup, l2 = _errors(g, sol)
    sup_c, _ = _errors(coarse, sol)
    ratio = (len(g.nodes) - 1) / (len(coarse.nodes) - 1)
    if sup > 0 and sup_c > 0 and ratio > 1:
        order = math.log(sup_c / sup) / math.log(ratio)
    else:
        order = math.nan
    trunc = abs(sol.coeff_A) * g.s_min ** exponents(g.params).alpha
    return ErrorReport(sup, l2, order, trunc, len(g.nodes), sup_c)
