"""Exception hierarchy for the fragmentation lab."""

from typing import Optional


class FragLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidMassError(FragLabError, ValueError):
    """A mass value is negative or not finite."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"invalid mass {value!r} at index {index}")


class InvalidTreeError(FragLabError, ValueError):
    """Edge data does not describe a tree, or weights are not a probability vector."""


class InvalidWitnessError(FragLabError, ValueError):
    """A refinement witness is not total on the support of the finer partition."""


class InstanceTooLargeError(FragLabError):
    """Exact witness search declined: the support exceeds the brute-force guard."""

    def __init__(self, support: int, max_support: int):
        self.support = support
        self.max_support = max_support
        super().__init__(
            f"instance too large for exact search: support {support} > {max_support}"
        )


class ExactRegimeExceededError(FragLabError):
    """Exact O(n^2) functional requested beyond the oracle regime."""

    def __init__(self, n: int, limit: int):
        self.n = n
        self.limit = limit
        super().__init__(
            f"n={n} exceeds the exact regime (n <= {limit}); use mc_expected_q instead"
        )


class SamplerBudgetExceededError(FragLabError):
    """A rejection sampler or step-capped construction ran out of budget."""


class ClockCouplingError(FragLabError, ValueError):
    """A uniform clock equals its upper end, so the coupled time would be infinite."""


class PathDomainError(FragLabError, ValueError):
    """A path was queried outside its horizon, or two paths do not share one."""


class ConfigError(FragLabError):
    """Experiment configuration is invalid."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class CheckFailure(FragLabError):
    """A verification check failed."""

    def __init__(self, check: str, detail: str = ""):
        self.check = check
        self.detail = detail
        super().__init__(f"check '{check}' failed: {detail}" if detail else f"check '{check}' failed")
