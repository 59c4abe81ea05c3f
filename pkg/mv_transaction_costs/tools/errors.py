# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

from typing import Any, Optional


class SolverError(Exception):
    """
    Base class of every error raised by the solver suite
    """


class ConfigError(SolverError):
    """
    Run configuration is missing, unreadable or violates a parameter invariant
    """


class DomainError(SolverError, ValueError):
    """
    An argument lies outside the domain an operation is defined on
    """


class FeasibilityError(SolverError):
    """
    Target expected wealth is outside the admissible interval
    """

    def __init__(self, message: str, interval: Optional[Any] = None) -> None:
        super().__init__(message)
        self.interval: Optional[Any] = interval


class NumericalIntegrityError(SolverError):
    """
    A numerical procedure produced a result that cannot be trusted
    """


class SingularityError(NumericalIntegrityError):
    """
    Obstacle solution approached zero where the operator divides by it
    """


class ConvergenceError(NumericalIntegrityError):
    """
    Newton iteration did not converge on a time step
    """

    def __init__(self, message: str, step_index: int, residual: float) -> None:
        super().__init__(message)
        self.step_index: int = step_index
        self.residual: float = residual


class ConsistencyError(NumericalIntegrityError):
    """
    Penalized solution violates an obstacle by more than the penalty error allows
    """


class RootBracketError(NumericalIntegrityError):
    """
    Root scan found no (or more than one) admissible sign change
    """

    def __init__(self, message: str, scanned: Optional[list[tuple[float, float]]] = None,
                 brackets: Optional[list[tuple[float, float]]] = None) -> None:
        super().__init__(message)
        self.scanned: list[tuple[float, float]] = scanned or []
        self.brackets: list[tuple[float, float]] = brackets or []
