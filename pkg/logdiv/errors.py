"""
Exception hierarchy shared by every logdiv module.

The CLI maps these onto exit codes in one table (see logdiv.main), so new
failure modes should subclass one of the three families below rather than
LogDivError directly.
"""
from __future__ import annotations

from typing import Optional


class LogDivError(Exception):
    """Base class for all logdiv failures."""


# ------------------------------------------------------------------------------
# Configuration
# ------------------------------------------------------------------------------

class ConfigError(LogDivError):
    """Bad run config, unknown built-in, or alpha inconsistent with a class."""


# ------------------------------------------------------------------------------
# Domain failures (a point or segment is outside where the math is defined)
# ------------------------------------------------------------------------------

class DomainError(LogDivError):
    pass


class StencilLeavesDomain(DomainError):
    pass


class DegenerateDenominator(DomainError):
    pass


class LogDomainError(DomainError):
    pass


class IterateLeftDomain(DomainError):
    pass


class InfeasibleParameter(DomainError):
    pass


class SupportViolation(DomainError):
    pass


class DualSegmentInfeasible(DomainError):
    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


# ------------------------------------------------------------------------------
# Numerical failures
# ------------------------------------------------------------------------------

class NumericalError(LogDivError):
    pass


class NoConvergence(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    def __init__(self, message: str, min_eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularHessian(NumericalError):
    pass


class EmptyFeasibleGrid(NumericalError):
    pass


class NonUniqueCGradient(NumericalError):
    pass


class ResidualTooLarge(NumericalError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ClosednessViolation(NumericalError):
    def __init__(self, message: str, curl: float):
        super().__init__(message)
        self.curl = curl


class ClassViolation(NumericalError):
    pass


class DegenerateDirection(NumericalError):
    pass


# ------------------------------------------------------------------------------
# Suites
# ------------------------------------------------------------------------------

class SuiteFailure(LogDivError):
    def __init__(self, message: str, failed: Optional[list] = None):
        super().__init__(message)
        self.failed = failed or []
