"""Chat-completion boundary: one remote OpenAI-compatible backend, one scripted.

The scripted backend replays canned responses keyed by a hash of the request's
message contents (or an explicit ``[[case:tag]]`` token in the last user
message), which makes every downstream stage testable offline and lets golden
episodes replay deterministically with zero network.

The API key is read from the environment at call time and never stored on the
config, logged, or embedded in error messages.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from graphforge.errors import (
    AuthError,
    MalformedResponse,
    NoTranscriptMatch,
    RateLimited,
    TransportError,
)

logger = logging.getLogger(__name__)

_CASE_TAG_RE = re.compile(r"\[\[case:([^\]]+)\]\]")

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown message role {self.role!r}")


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = 0.3
    top_p: float = 1.0
    max_tokens: int = 4096

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be a system or user turn")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: Usage = field(default_factory=Usage)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff_ms: int = 250

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be positive")


@dataclass(frozen=True)
class BackendConfig:
    """Exactly the fields for the chosen kind may be set."""

    kind: str  # "remote" | "scripted"
    base_url: str | None = None
    api_key_env: str | None = None
    transcript_path: str | None = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.kind == "remote":
            if not self.base_url:
                raise ValueError("remote backend requires base_url")
            if self.transcript_path is not None:
                raise ValueError("remote backend must not set transcript_path")
        elif self.kind == "scripted":
            if not self.transcript_path:
                raise ValueError("scripted backend requires transcript_path")
            if self.base_url is not None or self.api_key_env is not None:
                raise ValueError("scripted backend must not set base_url/api_key_env")
        else:
            raise ValueError(f"unknown backend kind {self.kind!r}")


# --- scripted transcripts -----------------------------------------------------

def match_key_for(messages: tuple[Message, ...]) -> str:
    """Explicit ``[[case:tag]]`` in the last user turn, else a content hash."""
    for msg in reversed(messages):
        if msg.role == "user":
            tag = _CASE_TAG_RE.search(msg.content)
            if tag:
                return tag.group(1)
            break
    joined = "".join(m.content for m in messages)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


_transcript_cache: dict[tuple[str, int, int], dict[str, dict]] = {}


def _load_transcript(path: str) -> dict[str, dict]:
    stat = os.stat(path)
    cache_key = (os.path.abspath(path), stat.st_mtime_ns, stat.st_size)
    cached = _transcript_cache.get(cache_key)
    if cached is not None:
        return cached
    entries: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            key = entry["match_key"]
            # First entry for a key wins; later duplicates are fixture bugs.
            if key in entries:
                logger.warning("transcript %s line %d duplicates key %s", path, lineno, key[:16])
                continue
            entries[key] = entry
    _transcript_cache[cache_key] = entries
    return entries


def _complete_scripted(cfg: BackendConfig, req: ChatRequest) -> ChatResponse:
    entries = _load_transcript(cfg.transcript_path)
    key = match_key_for(req.messages)
    entry = entries.get(key)
    if entry is None:
        last_user = next((m.content for m in reversed(req.messages) if m.role == "user"), "")
        raise NoTranscriptMatch(
            f"no transcript entry for key {key[:16]}... "
            f"(last user turn starts: {last_user[:80]!r})"
        )
    return ChatResponse(
        content=entry["content"],
        finish_reason=entry.get("finish_reason", "stop"),
        usage=Usage(
            prompt_tokens=int(entry.get("prompt_tokens", 0)),
            completion_tokens=int(entry.get("completion_tokens", 0)),
        ),
    )


def write_transcript(path: str | Path, entries: list[dict]) -> None:
    """Persist scripted entries; each needs ``match_key`` and ``content``."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


# --- remote backend -------------------------------------------------------------

def _complete_remote(cfg: BackendConfig, req: ChatRequest) -> ChatResponse:
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env, "") if cfg.api_key_env else ""
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": req.model,
        "messages": [{"role": m.role, "content": m.content} for m in req.messages],
        "temperature": req.temperature,
        "top_p": req.top_p,
        "max_tokens": req.max_tokens,
    }
    try:
        resp = requests.post(url, json=body, headers=headers, timeout=cfg.timeout_s)
    except requests.RequestException as exc:
        raise TransportError(f"request to {url} failed: {type(exc).__name__}") from exc
    if resp.status_code in (401, 403):
        raise AuthError(f"HTTP {resp.status_code} from {url}")
    if resp.status_code == 429:
        raise RateLimited(f"HTTP 429 from {url}")
    if resp.status_code >= 500:
        raise TransportError(f"HTTP {resp.status_code} from {url}")
    if resp.status_code != 200:
        raise MalformedResponse(f"unexpected HTTP {resp.status_code} from {url}")
    try:
        payload = resp.json()
        choice = payload["choices"][0]
        content = choice["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"cannot decode completion body: {exc}") from exc
    if content is None:
        raise MalformedResponse("completion content is null")
    finish = choice.get("finish_reason", "stop")
    if finish not in ("stop", "length"):
        finish = "other"
    usage = payload.get("usage", {}) or {}
    return ChatResponse(
        content=content,
        finish_reason=finish,
        usage=Usage(
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        ),
    )


# Optional observer invoked after every successful completion; the pipeline
# uses it to attribute token usage to roles. Must be thread-safe.
_usage_hook = None


def set_usage_hook(hook) -> None:
    global _usage_hook
    _usage_hook = hook


def complete(cfg: BackendConfig, req: ChatRequest) -> ChatResponse:
    """One call, no retries. Scripted lookups never touch the network."""
    if cfg.kind == "scripted":
        resp = _complete_scripted(cfg, req)
    else:
        resp = _complete_remote(cfg, req)
    if _usage_hook is not None:
        _usage_hook(cfg, req, resp)
    return resp


def complete_with_retry(
    cfg: BackendConfig,
    req: ChatRequest,
    *,
    sleep=time.sleep,
    rng: random.Random | None = None,
) -> ChatResponse:
    """Retry RateLimited/TransportError with full-jitter exponential backoff.

    Auth and shape errors are never retried. Whatever error survives carries
    the number of attempts made. ``sleep``/``rng`` are injectable for tests.
    """
    rng = rng or random
    policy = cfg.retry
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return complete(cfg, req)
        except (RateLimited, TransportError) as exc:
            exc.attempts = attempt
            if attempt == policy.max_attempts:
                raise
            cap_s = policy.base_backoff_ms * (2 ** (attempt - 1)) / 1000.0
            delay = rng.uniform(0.0, cap_s)
            logger.debug("retryable backend error (attempt %d), sleeping %.3fs", attempt, delay)
            sleep(delay)
        except (AuthError, MalformedResponse, NoTranscriptMatch) as exc:
            exc.attempts = attempt
            raise
    raise AssertionError("unreachable")  # pragma: no cover
