"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line driver:
1 for configuration problems, 2 for domain and time-ordering violations,
3 for numerical failures.
"""

from __future__ import annotations

__all__ = [
    "GamowLabError",
    "ConfigError",
    "InvalidParameter",
    "DomainError",
    "SemigroupDomain",
    "TimeOrderViolation",
    "UnknownChannel",
    "PoleEvaluation",
    "ZeroBranch",
    "ZeroNorm",
    "NotHardy",
    "ContourTooClose",
    "QuadratureFailure",
    "NoConvergence",
    "DuplicateRoot",
    "NonConvergence",
    "InsufficientData",
]


class GamowLabError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ConfigError(GamowLabError, ValueError):
    exit_code = 1


class InvalidParameter(GamowLabError, ValueError):
    """A constructor argument violates a type invariant."""

    exit_code = 2


class DomainError(GamowLabError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class SemigroupDomain(DomainError):
    """Semigroup evolution requested outside its half-line of definition."""


class TimeOrderViolation(DomainError):
    """Times are not strictly increasing where causality requires it."""


class UnknownChannel(DomainError, KeyError):
    pass


class PoleEvaluation(DomainError, ZeroDivisionError):
    """Evaluation exactly at a pole."""


class ZeroBranch(DomainError):
    """A history branch has (numerically) zero probability."""


class ZeroNorm(DomainError):
    pass


class NotHardy(DomainError):
    """A wavefunction failed the Hardy-class test for its half-plane."""


class ContourTooClose(DomainError):
    """A singularity lies too close to the integration path."""


class QuadratureFailure(GamowLabError, ArithmeticError):
    exit_code = 3


class NoConvergence(GamowLabError, ArithmeticError):
    exit_code = 3


class DuplicateRoot(GamowLabError, ArithmeticError):
    exit_code = 3


class NonConvergence(NoConvergence):
    """Likelihood maximisation failed."""


class InsufficientData(GamowLabError, ValueError):
    exit_code = 3
