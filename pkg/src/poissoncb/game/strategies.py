"""Stopping rules for the two players.

A rule is asked, at each Poisson arrival ``index >= 1``, whether it stops.
It sees the arrival index, the arrival time, the spot and whether the
spot has reached ``sbar`` at some point up to now (which makes that
arrival ``T_M`` or later).  Rules act on whole arrays of paths at once.

The engines end every game at ``T_M`` at the latest, whatever the rules
say: both players stop there and the tie goes to conversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import StrategyError
from ..model import ModelParams, Regime, classify_regime


@dataclass(frozen=True)
class Rule:
    name: str = "rule"

    def fires(self, index: int, t, s, hit) -> np.ndarray:
        if index < 1:
            raise StrategyError(f"{self.name}: stopping is only allowed from the first arrival on "
                                f"(index {index})")
        return np.asarray(self._fires(t, np.asarray(s), np.asarray(hit, bool)), bool)

    def _fires(self, t, s, hit):
        raise NotImplementedError


@dataclass(frozen=True)
class StopAtFirstArrival(Rule):
    name: str = "StopAtFirstArrival"

    def _fires(self, t, s, hit):
        return np.ones(np.shape(s), bool)


@dataclass(frozen=True)
class StopAtTM(Rule):
    """Stop at the first arrival at or after the spot has touched ``sbar``."""

    name: str = "StopAtTM"

    def _fires(self, t, s, hit):
        return hit


@dataclass(frozen=True)
class NeverBeforeTM(StopAtTM):
    """Wait until ``T_M``; it stops exactly where :class:`StopAtTM` does."""

    name: str = "NeverBeforeTM"


@dataclass(frozen=True)
class ThresholdConvert(Rule):
    x: float = float("nan")
    name: str = "ThresholdConvert"

    def _fires(self, t, s, hit):
        return s >= self.x


@dataclass(frozen=True)
class PredicateRule(Rule):
    """Wrap an arbitrary ``fn(index, t, s, hit) -> bool array``."""

    fn: Callable | None = None
    name: str = "custom"

    def fires(self, index, t, s, hit):
        if index < 1:
            raise StrategyError(f"{self.name}: stopping is only allowed from the first arrival on "
                                f"(index {index})")
        return np.asarray(self.fn(index, t, s, hit), bool)


@dataclass(frozen=True)
class StrategyPair:
    firm: Rule
    investor: Rule

    @property
    def label(self) -> str:
        return f"firm={self.firm.name},investor={self.investor.name}"


def settle(investor_fires, firm_fires, s, gamma: float, K: float):
    """Terminal leg at an arrival: ``gamma s`` if the holder converts (ties included), else ``K``.

    Returns ``(stopped, payoff, converted)``; ``payoff`` is ``nan`` where nobody stops.
    """
    inv = np.asarray(investor_fires, bool)
    firm = np.asarray(firm_fires, bool)
    s = np.asarray(s, float)
    stopped = inv | firm
    payoff = np.where(inv, gamma * s, np.where(firm, K, np.nan))
    return stopped, payoff, inv


def optimal_strategy(p: ModelParams, x_star: float | None = None) -> StrategyPair:
    regime = classify_regime(p)
    if regime is Regime.CASE_I:
        return StrategyPair(StopAtTM(), StopAtTM())
    if regime is Regime.CASE_II:
        return StrategyPair(StopAtFirstArrival(), StopAtTM())
    if x_star is None:
        from ..boundary import solve_conversion_boundary

        x_star = solve_conversion_boundary(p)
    return StrategyPair(StopAtTM(), ThresholdConvert(x=float(x_star)))


def rule_from_name(name: str, x_star: float | None = None) -> Rule:
    """Parse ``StopAtFirstArrival``, ``StopAtTM``, ``NeverBeforeTM`` or ``ThresholdConvert[:x]``.

    ``ThresholdConvert:1.5x`` scales ``x_star`` by 1.5.
    """
    base, _, arg = name.partition(":")
    simple = {"StopAtFirstArrival": StopAtFirstArrival, "StopAtTM": StopAtTM,
              "NeverBeforeTM": NeverBeforeTM}
    if base in simple and not arg:
        return simple[base]()
    if base == "ThresholdConvert":
        if not arg:
            if x_star is None:
                raise StrategyError("ThresholdConvert needs a level")
            return ThresholdConvert(x=x_star)
        if arg.endswith("x"):
            if x_star is None:
                raise StrategyError("relative threshold needs the conversion boundary")
            return ThresholdConvert(x=float(arg[:-1]) * x_star, name=f"ThresholdConvert({arg})")
        return ThresholdConvert(x=float(arg), name=f"ThresholdConvert({arg})")
    raise StrategyError(f"unknown rule {name!r}")
