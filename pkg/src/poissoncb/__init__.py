"""Perpetual convertible bonds whose holder and issuer may act only at Poisson arrival times."""

from .analytic import (AnalyticSolution, ClassicalSolution, build_classical_solution,
                       build_constrained_solution, price_classical, price_constrained)
from .boundary import (boundary_residual, solve_conversion_boundary, verify_smooth_pasting)
from .errors import (BracketError, ConfigError, DomainError, MismatchError, NoConvergence,
                     ParamMismatch, PastingViolation, PoissonCBError, SeedError, StrategyError)
from .model import (ModelParams, Regime, bounds, classify_regime, exponents, load_params,
                    threshold_sbar, validate_params)

__version__ = "0.1.0"
