"""Exception types shared across the package."""


class BudgetExceededError(RuntimeError):
    """Raised when an exact enumeration would exceed the configured budget."""

    def __init__(self, cost: int, budget: int, what: str = "enumeration"):
        self.cost = int(cost)
        self.budget = int(budget)
        super().__init__(
            f"{what} would evaluate {self.cost} configurations, "
            f"exceeding the budget of {self.budget}"
        )


class ImpossibleObservationError(ValueError):
    """The observation cannot be produced by any encoder in the family.

    Signals a model mismatch between the family and the observed pairs.
    """


class SupportViolationError(ArithmeticError):
    """A mismatched distribution assigns zero mass where the posterior does not.

    The cross-entropy score diverges in this case, so it is reported as an
    explicit error instead of returning infinity.
    """


class NumericDivergenceError(ArithmeticError):
    """A gradient-based run produced a non-finite loss or parameter."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)
