"""Exception hierarchy shared by all heatlab modules."""

from __future__ import annotations


class HeatlabError(Exception):
    """Base class for every error raised by heatlab."""


class DimensionError(HeatlabError, ValueError):
    pass


class SymmetryError(HeatlabError, ValueError):
    """Input lacks the (anti)symmetry structure an operation requires."""


class ConvergenceError(HeatlabError, RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class SingularMatrixError(HeatlabError, ArithmeticError):
    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class CapacityError(HeatlabError, ValueError):
    pass


class ValidationError(HeatlabError, ValueError):
    pass


class ConnectivityError(ValidationError):
    pass


class DomainError(HeatlabError, ValueError):
    pass


class ContractError(HeatlabError, ValueError):
    """Operation called on an instance outside the regime where it is meaningful."""


class UndefinedSeminormError(HeatlabError, ValueError):
    pass


class FitError(HeatlabError, ValueError):
    pass


class ScenarioError(HeatlabError, ValueError):
    """Scenario file failed to parse or validate."""
