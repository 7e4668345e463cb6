"""Exception hierarchy shared by the solvers and the command line."""


class PoissonCBError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PoissonCBError, ValueError):
    """Parameters or arguments outside the model's admissible domain."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(PoissonCBError, RuntimeError):
    """A numerical procedure failed to produce an answer."""


class BracketError(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PastingViolation(PoissonCBError, AssertionError):
    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("smooth-pasting checks failed: " + ", ".join(self.failed))


class ParamMismatch(PoissonCBError, ValueError):
    pass


class ConfigError(PoissonCBError, ValueError):
    pass


class SeedError(PoissonCBError, ValueError):
    pass


class StrategyError(PoissonCBError, ValueError):
    pass


class MismatchError(PoissonCBError, AssertionError):
    """Reproduced table cells disagree with the reference values."""

    def __init__(self, cells):
        self.cells = list(cells)
        lines = [f"{name}: got {got:.6f}, expected {want:.4f}" for name, got, want in self.cells]
        super().__init__("table mismatch:\n  " + "\n  ".join(lines))
