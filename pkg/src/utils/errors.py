from collections.abc import Iterable, Sequence
from enum import Enum
from typing import Optional


class Hypothesis(Enum):
    """Hypotheses an analysis can refuse on. Values are the diagnostics shown to the user."""

    LAMBDA_COMPLEX = "The extremal eigenvalue is complex, the bifurcation prediction requires it to be real."
    LAMBDA_NOT_SIMPLE = "The extremal eigenvalue is not simple, the predicted pattern is not unique."
    REAL_PART_NOT_ISOLATED = "Another eigenvalue shares the real part of the extremal eigenvalue."
    NONPOSITIVE_DENOMINATOR = "alpha - beta + lambda is not positive, no opinion-forming bifurcation exists."
    MODE_INTERACTION = (
        "gamma == delta: agreement and disagreement bifurcations happen at the same critical attention,"
        " this mode interaction is not analyzed."
    )
    HETEROGENEOUS = "Parameters are not homogeneous across agents, the closed form threshold does not apply."
    NONZERO_INPUT = "The Jacobian formula is only valid at the neutral equilibrium with zero input."
    NOT_SYMMETRIC = "The adjacency matrix is not symmetric."
    NOT_STRONGLY_CONNECTED = "The adjacency matrix is reducible (the graph is not strongly connected)."
    NOT_PERRON = "The leading eigenvector is not entrywise positive."
    CLUSTER_HETEROGENEOUS = "Parameters are not homogeneous within clusters or between cluster pairs."
    UNSUPPORTED_KIND = "The closed form eigenvalue is only known for all-to-all and cycle graphs."


class OpinionLabError(Exception):
    """Base class for all errors raised by this project."""


class ParameterError(OpinionLabError, ValueError):
    """A parameter value violates its constraints."""

    def __init__(self, field: str, value: object, reason: str) -> None:
        super().__init__(f"Invalid {field}={value!r}: {reason}")
        self.field = field
        self.value = value
        self.reason = reason

    def as_record(self) -> dict[str, object]:
        return {"error": type(self).__name__, "field": self.field, "value": repr(self.value), "reason": self.reason}


class DimensionError(ParameterError):
    """Arrays don't have the shape the operation requires."""

    def __init__(self, field: str, expected: Sequence[int], received: Sequence[int]) -> None:
        super().__init__(field, tuple(received), f"expected shape {tuple(expected)}")
        self.expected = tuple(expected)
        self.received = tuple(received)


class HypothesisError(OpinionLabError):
    """An analysis refused to run because some of its hypotheses don't hold."""

    def __init__(self, failures: Iterable[Hypothesis], detail: Optional[str] = None) -> None:
        self.failures = list(failures)
        self.detail = detail
        message = " ".join(failure.value for failure in self.failures)
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)

    def as_record(self) -> dict[str, object]:
        return {
            "error": type(self).__name__,
            "hypotheses": [failure.name for failure in self.failures],
            "messages": [failure.value for failure in self.failures],
            "detail": self.detail,
        }


class IntegrationError(OpinionLabError):
    """The integrated state stopped being finite."""

    def __init__(self, last_finite_time: float, *args: object) -> None:
        super().__init__(f"State became non-finite after t={last_finite_time}", *args)
        self.last_finite_time = last_finite_time

    def as_record(self) -> dict[str, object]:
        return {"error": type(self).__name__, "last_finite_time": self.last_finite_time}


class BracketError(OpinionLabError):
    """Both ends of a bisection bracket produced the same outcome."""

    def __init__(self, lower: float, upper: float, lower_outcome: bool, upper_outcome: bool) -> None:
        super().__init__(
            f"Bracket [{lower}, {upper}] does not straddle the threshold"
            f" (cascade at lower={lower_outcome}, at upper={upper_outcome})"
        )
        self.lower = lower
        self.upper = upper
        self.lower_outcome = lower_outcome
        self.upper_outcome = upper_outcome

    def as_record(self) -> dict[str, object]:
        return {
            "error": type(self).__name__,
            "lower": self.lower,
            "upper": self.upper,
            "lower_outcome": self.lower_outcome,
            "upper_outcome": self.upper_outcome,
        }


class ChecklistError(OpinionLabError):
    """Some expected properties of a figure reproduction failed."""

    def __init__(self, figure_id: str, failed: Sequence[str]) -> None:
        super().__init__(f"{figure_id}: failed checks: {', '.join(failed)}")
        self.figure_id = figure_id
        self.failed = list(failed)

    def as_record(self) -> dict[str, object]:
        return {"error": type(self).__name__, "figure": self.figure_id, "failed": self.failed}
