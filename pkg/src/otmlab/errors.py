"""Exception types raised across the package."""


class InvalidSizeError(ValueError):
    """A register size is zero or exceeds the configured simulation limit."""


class BudgetExceededError(RuntimeError):
    """A wrapped token was queried more often than its query budget allows."""


class AlreadyConsumedError(RuntimeError):
    """An ideal one-time memory was asked to execute a second time."""


class WitnessVerificationError(AssertionError):
    """An SDP witness violates a named feasibility constraint."""

    def __init__(self, constraint: str, slack: float):
        super().__init__(f"constraint {constraint!r} violated (slack {slack:.3e})")
        self.constraint = constraint
        self.slack = slack
