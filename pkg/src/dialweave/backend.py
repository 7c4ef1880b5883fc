"""Text-completion backends: a scriptable mock and a remote HTTP client.

Every completion that reaches a real model can be recorded to a JSONL audit
log; ``audit_to_script`` turns such a log into a mock script keyed by prompt
hash, so any recorded run can be replayed offline, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import requests

from .errors import (
    BackendError,
    BackendTimeoutError,
    MalformedResponseError,
    ParameterError,
    RateLimitError,
    ScriptExhaustedError,
    TransientBackendError,
)

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.5

_TRANSIENT = (TransientBackendError, RateLimitError, BackendTimeoutError)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 1024
    temperature: float = 0.7

    def __post_init__(self):
        if not self.prompt:
            raise ParameterError("completion prompt is empty")
        if self.max_tokens < 1:
            raise ParameterError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    backend: str
    attempts: int = 1


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockBackend:
    """Replays canned responses, either in order or keyed by prompt hash.

    A positional script is a list of texts consumed one per call; a keyed
    script maps sha256(prompt) to the text to return, which is what
    ``audit_to_script`` produces.
    """

    name = "mock"

    def __init__(self, responses: list[str] | None = None,
                 by_prompt: dict[str, str] | None = None):
        if (responses is None) == (by_prompt is None):
            raise ParameterError("provide either a positional script or a keyed one")
        self._responses = list(responses) if responses is not None else None
        self._by_prompt = dict(by_prompt) if by_prompt is not None else None
        self.calls = 0

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        data = json.loads(Path(path).read_text("utf-8"))
        if isinstance(data, list):
            return cls(responses=data)
        if isinstance(data, dict) and "by_prompt_sha256" in data:
            return cls(by_prompt=data["by_prompt_sha256"])
        if isinstance(data, dict) and "responses" in data:
            return cls(responses=data["responses"])
        raise ParameterError(f"unrecognized mock script layout in {path}")

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        if self._responses is not None:
            if not self._responses:
                raise ScriptExhaustedError(f"mock script exhausted after {self.calls - 1} calls")
            return self._responses.pop(0)
        key = prompt_digest(request.prompt)
        if key not in self._by_prompt:
            raise ScriptExhaustedError(f"mock script has no response for prompt {key[:12]}…")
        return self._by_prompt[key]


class RemoteBackend:
    """POSTs to ``{base_url}/complete`` and expects ``{"text": ...}`` back."""

    def __init__(self, base_url: str, model: str | None = None,
                 timeout: float = DEFAULT_TIMEOUT, session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self._session = session or requests.Session()
        self.name = f"remote:{self.base_url}"

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if self.model:
            payload["model"] = self.model
        try:
            resp = self._session.post(
                f"{self.base_url}/complete", json=payload, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise BackendTimeoutError(f"backend timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise TransientBackendError(f"backend request failed: {exc}") from exc
        if resp.status_code == 429:
            raise RateLimitError("backend rate limited the request")
        if resp.status_code >= 500:
            raise TransientBackendError(f"backend returned {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendError(f"backend rejected the request: {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise MalformedResponseError("backend response is not JSON", resp.text) from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise MalformedResponseError(
                'backend response lacks a string "text" field', resp.text
            )
        return body["text"]


def complete(
    backend,
    request: CompletionRequest,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    audit_path=None,
    sleep=time.sleep,
) -> CompletionResult:
    """Run one completion with retry on transient failures.

    Waits backoff * 2^attempt between tries.  Every attempt, failed or not,
    is appended to the audit log when one is given.
    """
    last_error = None
    for attempt in range(1, retries + 2):
        try:
            text = backend.complete(request)
        except _TRANSIENT as exc:
            last_error = exc
            _audit(audit_path, backend, request, attempt, error=exc)
            if attempt <= retries:
                sleep(backoff * (2 ** (attempt - 1)))
            continue
        _audit(audit_path, backend, request, attempt, text=text)
        return CompletionResult(text=text, backend=backend.name, attempts=attempt)
    raise last_error


def _audit(audit_path, backend, request, attempt, text=None, error=None):
    if audit_path is None:
        return
    entry = {
        "ts": datetime.now(timezone.utc).isoformat(),
        "backend": backend.name,
        "prompt_sha256": prompt_digest(request.prompt),
        "prompt_chars": len(request.prompt),
        "attempt": attempt,
    }
    if error is not None:
        entry["error"] = f"{type(error).__name__}: {error}"
    else:
        entry["text"] = text
    with open(audit_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


def audit_to_script(audit_path) -> dict:
    """Collapse an audit log to a keyed mock script (last success wins)."""
    by_prompt = {}
    with open(audit_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            if "text" in entry:
                by_prompt[entry["prompt_sha256"]] = entry["text"]
    return {"by_prompt_sha256": by_prompt}
