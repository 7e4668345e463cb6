"""Game-theoretic checks of the closed-form value by backward induction and simulation."""

from .diagnostics import (DriftReport, MartingaleReport, SaddleReport, martingale_diagnostic,
                          saddle_check)
from .lattice import LatticeConfig, lattice_value
from .montecarlo import SimulationReport, simulate_paths, simulate_value
from .strategies import (NeverBeforeTM, PredicateRule, Rule, StopAtFirstArrival, StopAtTM,
                         StrategyPair, ThresholdConvert, optimal_strategy, rule_from_name, settle)
