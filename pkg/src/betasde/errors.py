"""Exception types raised by the simulation and verification layers."""


class BetaSdeError(Exception):
    """Base class for package errors."""


class SingularMatrix(BetaSdeError):
    """A factorization pivot fell below tolerance.

    Inside the integrators this means the clock left the region where
    ``K_t`` is invertible, which usually indicates a step that is too large.
    """


class HorizonExceeded(BetaSdeError):
    """Some coordinate was not absorbed before the horizon cap."""


class UnsupportedIndex(BetaSdeError):
    """GIG index outside the half-integer closed forms."""


class UnsupportedDimension(BetaSdeError):
    """Operation only available for small vertex counts."""


class DegenerateClock(BetaSdeError):
    """A Lamperti clock failed monotonicity."""


class ClockOverrun(BetaSdeError):
    """A conditional clock reached its terminal value before the horizon."""


class InsufficientHits(BetaSdeError):
    """Too few replicas fell in a conditioning window."""


class ConfigError(BetaSdeError, ValueError):
    """Invalid experiment configuration."""
