"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent problem / norm configuration."""


class ConstraintError(ConfigurationError):
    """A structural inequality on (S, k, b, d) is violated."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SingularPointError(ArithmeticError):
    """Evaluation requested on (or numerically at) the singular set."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class CalibrationError(ValueError):
    """No admissible (rho, nu) pair for the requested compact."""


class CapOverflowError(IndexError):
    """A majorant lookup fell outside the computed index caps."""


class BudgetError(ValueError):
    """The bivariate degree budget of the oracle is exhausted."""


class InvariantError(RuntimeError):
    """An internal invariant that should be impossible to break was broken."""
