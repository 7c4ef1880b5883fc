"""Exception hierarchy shared across the package.

Every error that can cross the HTTP boundary carries a stable machine
``code`` so the service layer can map it to a response without guessing.
"""

from __future__ import annotations


class DialweaveError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(DialweaveError):
    """Input failed schema or invariant checks.

    ``violations`` lists every individual problem found, not just the first.
    """

    code = "validation_error"

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = violations or []
        if self.violations:
            message = f"{message}: " + "; ".join(self.violations)
        super().__init__(message)


class ParseError(DialweaveError):
    """Structured text could not be parsed; carries the offending fragment."""

    code = "parse_error"

    def __init__(self, message: str, fragment: str = "", line: int | None = None):
        self.fragment = fragment
        self.line = line
        detail = message
        if line is not None:
            detail += f" (line {line})"
        if fragment:
            detail += f": {fragment!r}"
        super().__init__(detail)


class ParameterError(DialweaveError):
    """A call argument is outside its documented range."""

    code = "parameter_error"


class StateError(DialweaveError):
    """Operation not permitted in the session's current phase."""

    code = "state_error"


class InconsistencyError(DialweaveError):
    """A state edit referenced a fill or value that does not exist."""

    code = "inconsistency_error"


class NotFoundError(DialweaveError):
    code = "not_found"


class StaleReferenceError(DialweaveError):
    """Optimistic-concurrency guard: caller's expected sequence is outdated."""

    code = "stale_reference"


class ContextOverflowError(DialweaveError):
    """Prompt token estimate exceeds the backend context limit."""

    code = "context_overflow"


class GenerationError(DialweaveError):
    """LM output could not be parsed even after a retry.

    ``raw_text`` preserves the model output for the reviewer.
    """

    code = "generation_error"

    def __init__(self, message: str, raw_text: str = ""):
        self.raw_text = raw_text
        super().__init__(message)


class BackendError(DialweaveError):
    """Base class for LM backend failures."""

    code = "backend_error"


class TransientBackendError(BackendError):
    """Retryable failure (timeout, rate limit, 5xx)."""

    code = "backend_transient"


class BackendTimeoutError(TransientBackendError):
    code = "backend_timeout"


class RateLimitError(TransientBackendError):
    code = "backend_rate_limited"


class MalformedResponseError(BackendError):
    """Remote backend returned a body that does not match the protocol."""

    code = "backend_malformed_response"

    def __init__(self, message: str, body: str = ""):
        self.body = body
        super().__init__(message)


class ScriptExhaustedError(BackendError):
    """A positional mock script ran out of entries."""

    code = "script_exhausted"
