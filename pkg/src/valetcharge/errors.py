"""Exception types shared across the solver."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""


class ParameterError(ValueError):
    """A parameter set violates one of its invariants."""

    def __init__(self, field, message):
        super().__init__(message)
        self.field = field


class Infeasible(ValueError):
    """A (lambda, N) point or policy admits no steady-state market outcome.

    ``reason`` is a short machine-readable tag, one of
    ``"no_idle_root"``, ``"fleet_utilization"``, ``"charger_occupancy"``,
    ``"demand_range"``, ``"nonpositive_price"`` or ``"empty_grid"``.
    """

    def __init__(self, reason, detail=""):
        msg = reason if not detail else f"{reason}: {detail}"
        super().__init__(msg)
        self.reason = reason


class Unviable(ValueError):
    """The platform cannot break even under the imposed tax."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class BracketError(ValueError):
    """A bisection predicate does not change sign over its bracket."""


class Unstable(RuntimeError):
    """A simulated queue grew past its stability bound."""
