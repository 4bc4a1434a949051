"""Exception types shared across the package.

Everything derives from :class:`MetacoreError` so callers can catch the
package's failures with a single ``except`` clause.  The CLI maps a subset of
these onto process exit codes (see ``metacore.cli``).
"""


class MetacoreError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MetacoreError, ValueError):
    """A configuration value is missing, malformed, or out of range."""


class InstabilityError(MetacoreError):
    """An operation required a stabilizing controller / Schur-stable matrix
    and did not get one."""


class SolverError(MetacoreError):
    """A numerical solve failed to meet its residual or convergence contract."""


class ProbeInstabilityError(MetacoreError):
    """Too many zeroth-order probes landed outside the admissible region.

    Raised by the two-point estimator when the retry budget is exhausted;
    the usual fix is a smaller probe radius.
    """


class StabilityViolation(MetacoreError):
    """A meta-training update left the stabilizing set on some pool task."""


class GenerationError(MetacoreError):
    """Task-pool generation could not satisfy its post-conditions."""


class PoolFormatError(MetacoreError, ValueError):
    """A serialized task pool is malformed or has an unknown format tag."""
