"""Exception types shared across the package.

All library errors derive from ClockCtbnError so the CLI can map any of them
to its data/model exit code while letting genuine bugs surface as ordinary
exceptions.
"""


class ClockCtbnError(Exception):
    """Base class for model, data, and numerical errors raised by this package."""


class ModelError(ClockCtbnError):
    """Invalid model specification (graph, cardinalities, parameters)."""


class InvalidTrajectoryError(ClockCtbnError):
    """Trajectory violates ordering, domain, or self-transition rules."""


class ParseError(ClockCtbnError):
    """Malformed input file; message carries a line number where possible."""


class InsufficientDataError(ClockCtbnError):
    """No usable observations for a requested estimate."""


class StalledProcessError(ClockCtbnError):
    """Sampler failed to produce a finite event time."""


class IntegrationError(ClockCtbnError):
    """Numerical quadrature failed to converge within its refinement budget."""
