"""Shared exception types.

All inherit from ValueError so callers that do not care about the fine
distinction can catch one base class.
"""


class CutoffError(ValueError):
    """A Fock cutoff is invalid or too small for the requested amplitude."""


class ShapeError(ValueError):
    """Mode dimensions or matrix shapes do not match."""


class StateValidationError(ValueError):
    """A state or operator violates its defining invariants."""


class IntegrationError(RuntimeError):
    """A time integration lost validity (trace/positivity blow-up, divergence)."""


class SteadyStateError(RuntimeError):
    """No steady state exists or the solver did not reach tolerance."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed."""
