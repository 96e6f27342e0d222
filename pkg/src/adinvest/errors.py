"""Exception types raised across the package."""


class AdInvestError(Exception):
    """Base class for all package errors."""


class InvalidActionError(AdInvestError, KeyError):
    """An (investment, configuration) pair is not in a site's action set."""


class DegenerateFrameError(AdInvestError, ValueError):
    """A frame can have zero length (p = 0 together with t_freeze = 0)."""


class SpecValidationError(AdInvestError, ValueError):
    """A system spec breaks one of the standing model assumptions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InsufficientHorizonError(AdInvestError, ValueError):
    """Simulation horizon shorter than the longest realizable frame."""


class QualityUndefinedError(AdInvestError, ValueError):
    """Estimated model has no relative error bound below one."""


class ConfigError(AdInvestError, ValueError):
    """A JSON config document is structurally malformed."""
