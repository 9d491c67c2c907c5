"""Exception taxonomy for the whole package.

Kept in one module so the failure surface of every stage is visible at a
glance. Agent-output parse failures are deliberately distinct from backend
(transport) failures: the former are data problems the caller may retry with
a reminder, the latter follow the retry policy of the client.
"""

from __future__ import annotations


class GraphforgeError(Exception):
    """Base class for every error raised by this package."""


# --- constraint-graph layer -------------------------------------------------

class GraphError(GraphforgeError):
    pass


class NoJsonFound(GraphError):
    """No balanced top-level JSON object in the given text."""


class DecodeError(GraphError):
    """A balanced candidate object exists but is not well-formed JSON."""


class SchemaError(GraphError):
    """A decoded document is missing required keys or has wrong value shapes."""


class InvalidGraph(GraphError):
    """Operation requires a structurally valid graph and got violations."""

    def __init__(self, message: str, violations: list[tuple[str, str]] | None = None):
        super().__init__(message)
        self.violations = violations or []


# --- chat-completion client -------------------------------------------------

class BackendError(GraphforgeError):
    """Base class for chat/embedding backend failures.

    ``attempts`` is attached by the retry wrapper when the error is surfaced
    after exhaustion.
    """

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class TransportError(BackendError):
    """Network failure or HTTP >= 500. Retryable."""


class AuthError(BackendError):
    """HTTP 401/403. Never retried."""


class RateLimited(BackendError):
    """HTTP 429. Retryable."""


class NoTranscriptMatch(BackendError):
    """Scripted backend has no entry for the request's match key."""


class MalformedResponse(BackendError):
    """Response body (or status) does not fit the expected wire shape."""


# --- initialization ----------------------------------------------------------

class EmptyPool(GraphforgeError):
    """Filtering left fewer than one dimension or one leaf concept."""


# --- legislator agent-output parsing -----------------------------------------

class AgentOutputError(GraphforgeError):
    pass


class ProposalUnparseable(AgentOutputError):
    """Proposer never produced a decodable graph within the retry budget."""


class CritiqueUnparseable(AgentOutputError):
    pass


class DecisionUnparseable(AgentOutputError):
    pass


# --- executor -----------------------------------------------------------------

class QuestionUnextractable(AgentOutputError):
    """Executor response has no usable question marker."""


class EmptyResponse(AgentOutputError):
    pass


class VerdictUnparseable(AgentOutputError):
    """Judge response is missing one of the three labeled checks."""


# --- analysis -------------------------------------------------------------------

class AnalysisError(GraphforgeError):
    pass


class EmptyText(AnalysisError):
    """Text has no embeddable content (empty or no tokens)."""


class DimMismatch(AnalysisError):
    pass


class TooFewItems(AnalysisError):
    pass


class EmptySet(AnalysisError):
    pass


class LabelUnparseable(AnalysisError):
    """Judge returned a rating outside the five-level scale."""


class TagsUnparseable(AnalysisError):
    pass


# --- pipeline ---------------------------------------------------------------------

class ConfigError(GraphforgeError):
    pass


class PoolError(GraphforgeError):
    pass


class MissingMetric(GraphforgeError):
    """Plot-data emission requires a metric artifact that was never computed."""


class BudgetExhausted(GraphforgeError):
    """Episode budget ran out before reaching the sample target.

    The partial corpus stays on disk; ``manifest`` carries the final counts.
    """

    def __init__(self, message: str, manifest=None):
        super().__init__(message)
        self.manifest = manifest
