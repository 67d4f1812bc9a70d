"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, InputError and its
subclasses -> 3, ReplicationFailure -> 4.
"""


class DistclustError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DistclustError):
    """Invalid configuration: bad kernel parameters, malformed config files."""


class InputError(DistclustError):
    """Invalid data: dimension mismatches, undersized samples, bad files."""


class GenerationError(InputError):
    """A synthetic-data generator produced an invalid object.

    Carries enough context (offending index, sub-seed) to reproduce the
    failure in isolation.
    """

    def __init__(self, message, index=None, seed=None):
        super().__init__(message)
        self.index = index
        self.seed = seed


class ReplicationFailure(DistclustError):
    """Too many Monte Carlo replications failed to produce a result."""
