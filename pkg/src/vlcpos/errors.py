"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures (degenerate geometry, singular systems) with 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (bad key, bad range, bad layout)."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation (e.g. zero-length incidence vector)."""


class SingularSystemError(RuntimeError):
    """A linear system required by an estimator is rank deficient."""
