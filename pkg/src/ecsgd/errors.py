"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
divergence aborts exit with 3.
"""

from __future__ import annotations


class InvalidParameterError(ValueError):
    """A parameter is outside its documented domain (negative sigma, tau < 1, ...)."""


class ConfigurationError(ValueError):
    """A run configuration was rejected before stepping (cap violated, bad field, ...)."""


class DegenerateDesignError(ValueError):
    """A least-squares design matrix is singular to working precision."""


class InvalidComparisonError(ValueError):
    """Report inputs differ in fields that must match for the comparison to make sense."""


class RateFitError(ValueError):
    """A log-log rate fit is impossible (non-positive means or too few points)."""


class DivergenceError(RuntimeError):
    """A run produced NaN or suboptimality beyond the divergence threshold."""

    def __init__(self, message: str, iteration: int, run_id: str | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.run_id = run_id
