"""Exception types shared across the package.

The CLI maps these onto process exit codes, so the split matters:
configuration/parameter problems are distinct from runtime blow-ups and
from statistically inconclusive results.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ParameterError(ValueError):
    """A parameter combination is outside the admissible family."""


class ShapeError(ValueError):
    """Array arguments have inconsistent shapes."""


class ResourceError(RuntimeError):
    """A request would exceed a configured resource cap."""


class InconclusiveError(RuntimeError):
    """A statistical procedure cannot return a usable answer."""


class BlowUpError(RuntimeError):
    """A trajectory left the admissible region.

    Carries the first grid time at which the state became non-finite or
    exceeded the blow-up threshold.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = float(time)


class ConfigError(ValueError):
    """Invalid run configuration; collects every violation, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
