"""Exception hierarchy for the steering engine.

Every error raised by the library derives from PrefsteerError so callers can
catch one base type at the CLI boundary.
"""

from __future__ import annotations


class PrefsteerError(Exception):
    """Base class for all library errors."""


# --- distribution algebra ---

class NonFiniteInput(PrefsteerError):
    """A log-probability vector contains NaN or infinity."""


class SupportMismatch(PrefsteerError):
    """Two distributions were expected to share an identical support order."""


class EmptyUnion(PrefsteerError):
    """Support alignment received only empty inputs."""


class InvalidStrategyParam(PrefsteerError):
    """A sampling strategy parameter is outside its valid range."""


# --- backends ---

class BackendError(PrefsteerError):
    """Base class for policy-backend failures."""


class BackendUnavailable(BackendError):
    """A remote backend could not be reached after exhausting retries."""

    def __init__(self, message: str, attempts: int = 0, last_status: int | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.last_status = last_status


class UnknownContext(BackendError):
    """A local backend has no entry for the requested conditioning context."""


class BatchError(BackendError):
    """A batched query failed on one element; the original error is __cause__."""

    def __init__(self, index: int, message: str):
        super().__init__(f"batch element {index}: {message}")
        self.index = index


# --- rewards ---

class TokenNotInSupport(PrefsteerError):
    """The chosen token is absent from the aligned support."""


class DimensionMismatch(PrefsteerError):
    """Vector lengths disagree with the declared number of preferences."""


# --- weight optimization ---

class NonPositiveTau(PrefsteerError):
    """The weight-anchoring temperature must be strictly positive."""


class AllZeroPrior(PrefsteerError):
    """Every prior weight is zero; the closed form is undefined."""


class NoConvergence(PrefsteerError):
    """An iterative numerical oracle exceeded its iteration cap."""


# --- evaluation harness ---

class EmptyInput(PrefsteerError):
    """A metric computation received an empty score matrix."""


class EmptyTrace(PrefsteerError):
    """A trace export received a trace with no step records."""


# --- prompts and configuration ---

class MissingPlaceholder(PrefsteerError):
    """A prompt template slot was left empty."""


class LengthMismatch(PrefsteerError):
    """Preference list and weight vector lengths differ."""


class ConfigInvalid(PrefsteerError):
    """A run configuration failed schema validation."""
