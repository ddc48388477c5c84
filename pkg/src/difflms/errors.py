"""Exception types shared across the toolkit."""


class TopologyFormatError(ValueError):
    """A topology document is malformed (bad edge, bad index, disconnected graph)."""


class ConfigError(ValueError):
    """A scenario configuration is missing, unreadable, or violates an invariant."""


class NotStableError(RuntimeError):
    """A steady-state quantity was requested for an unstable configuration."""


class NumericalFailureError(RuntimeError):
    """A numerical routine (eigen-solver, linear solve) failed to produce a result."""
