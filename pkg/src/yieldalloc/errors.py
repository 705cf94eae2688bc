"""Exception hierarchy. The CLI maps each class to its own exit code."""


class YieldAllocError(Exception):
    exit_code = 1


class ConfigError(YieldAllocError, ValueError):
    """Invalid generator, drift, trainer, or controller parameters."""

    exit_code = 3


class ScenarioParseError(YieldAllocError, ValueError):
    """Malformed scenario file. The message names the offending line."""

    exit_code = 4

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class StateError(YieldAllocError, RuntimeError):
    """Operation invalid in the current object state (finalized ledger, finished episode)."""

    exit_code = 5


class BudgetError(YieldAllocError, ValueError):
    """Instance exceeds the brute-force enumeration budget."""

    exit_code = 6


class PreconditionError(YieldAllocError, ValueError):
    """Toy game violates the hypotheses of the shaped-reward optimality check."""

    exit_code = 7


class DivergenceError(YieldAllocError, FloatingPointError):
    """Training produced a non-finite loss."""

    exit_code = 8


class ReportError(YieldAllocError, ValueError):
    exit_code = 9
