"""Exception types shared across the package."""


class GaugelabError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(GaugelabError):
    """Fields or operators were combined across incompatible grids or
    fiber dimensions."""


class SolverDiverged(GaugelabError):
    """A linear or nonlinear solve failed to produce a usable answer."""


class EmptyBall(GaugelabError):
    """A ball contains no cell centers at the current resolution."""


class SmallnessViolated(GaugelabError):
    """A scaled energy scan exceeded the configured smallness threshold."""


class NotPositiveDefinite(GaugelabError):
    """A metric failed the symmetric positive definite check at some
    sample point."""


class ConfigError(GaugelabError):
    """A run configuration is malformed: unknown key, wrong type, or a
    value outside its documented range.  The message names the key."""
