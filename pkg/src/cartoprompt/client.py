"""HTTP clients for the teacher (chat) and completion (ask) endpoints.

Both speak the common JSON wire formats: chat completions take
{model, messages, temperature} and return choices[0].message.content;
raw completions take {model, prompt, ...} and return choices[0].text.
Auth tokens come from the environment, never from config files. Clock
and sleep are injectable so tests run without real waiting.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Optional

import requests

log = logging.getLogger(__name__)

TEACHER_TOKEN_ENV = "CARTOPROMPT_TEACHER_TOKEN"

# Retry on rate limiting and server-side failures only; other 4xx are
# caller bugs and retrying them just burns quota.
RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class ClientError(RuntimeError):
    """Request failed after exhausting retries."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class UpstreamFormatError(ClientError):
    """The endpoint answered 200 but the body was not in the wire format."""


@dataclass
class Reply:
    """A successful completion plus how hard it was to get."""

    content: str
    retries: int
    status: int = 200


class RateLimiter:
    """Enforces a minimum interval between consecutive requests."""

    def __init__(self, per_minute: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if per_minute <= 0:
            raise ValueError(f"rate limit must be positive, got {per_minute}")
        self.interval = 60.0 / per_minute
        self.clock = clock
        self.sleep = sleep
        self._last: Optional[float] = None

    def wait(self) -> None:
        now = self.clock()
        if self._last is not None:
            remaining = self.interval - (now - self._last)
            if remaining > 0:
                self.sleep(remaining)
                now = self.clock()
        self._last = now


class _JsonClient:
    def __init__(self, endpoint: str, model: str, token_env: str = TEACHER_TOKEN_ENV,
                 temperature: float = 1.0, max_retries: int = 3,
                 rate_limit_per_minute: float = 20.0, timeout: float = 120.0,
                 backoff_base_s: float = 1.0, session=None,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic):
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env
        self.temperature = temperature
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff_base_s = backoff_base_s
        self.session = session or requests.Session()
        self.sleep = sleep
        self.limiter = RateLimiter(rate_limit_per_minute, clock=clock, sleep=sleep)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, payload: dict) -> Reply:
        """POST with rate limiting and exponential backoff on retryable failures."""
        last_error: Optional[str] = None
        last_status: Optional[int] = None
        for attempt in range(self.max_retries + 1):
            if attempt > 0:
                self.sleep(self.backoff_base_s * 2 ** (attempt - 1))
            self.limiter.wait()
            try:
                response = self.session.post(self.endpoint, json=payload,
                                             headers=self._headers(),
                                             timeout=self.timeout)
            except requests.RequestException as exc:
                last_error, last_status = str(exc), None
                log.warning("request to %s failed (%s), attempt %d",
                            self.endpoint, exc, attempt + 1)
                continue
            if response.status_code == 200:
                return Reply(content=self._extract(response.json()), retries=attempt)
            last_error = f"HTTP {response.status_code}"
            last_status = response.status_code
            if response.status_code not in RETRYABLE_STATUSES:
                break
            log.warning("retryable HTTP %d from %s, attempt %d",
                        response.status_code, self.endpoint, attempt + 1)
        raise ClientError(f"request to {self.endpoint} failed: {last_error}",
                          status=last_status)

    def _extract(self, body) -> str:
        raise NotImplementedError


class ChatCompletionClient(_JsonClient):
    """Teacher-model client speaking the chat-completion format."""

    def complete(self, messages: list[dict]) -> Reply:
        payload = {"model": self.model, "messages": messages,
                   "temperature": self.temperature}
        return self._post(payload)

    def _extract(self, body) -> str:
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise UpstreamFormatError(
                f"chat response missing choices[0].message.content: {exc}") from exc


class CompletionClient(_JsonClient):
    """Raw-completion client used for Answer-suffix prompts."""

    def complete(self, prompt: str, max_tokens: Optional[int] = None) -> Reply:
        payload = {"model": self.model, "prompt": prompt,
                   "temperature": self.temperature}
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        return self._post(payload)

    def _extract(self, body) -> str:
        try:
            return body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise UpstreamFormatError(
                f"completion response missing choices[0].text: {exc}") from exc
