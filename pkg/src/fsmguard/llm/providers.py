"""Provider-agnostic chat completion with retry/backoff.

Wire contract: request carries {model, messages, temperature, top_p,
presence_penalty, frequency_penalty, max_tokens}; the reply text is the
first choice's message content.  Endpoint and model come from a config
file; the credential comes from the FSMGUARD_API_KEY environment variable.
"""
from __future__ import annotations

import json
import os
import random
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from .params import GenerationParams

API_KEY_ENV = "FSMGUARD_API_KEY"
MOCK_STEP_SEPARATOR = "---step---"


class ProviderError(RuntimeError):
    pass


class ProviderAuthError(ProviderError):
    """Bad or missing credential; never retried."""


class ProviderRateLimited(ProviderError):
    """Transient throttling; retried with backoff."""


class ProviderTimeout(ProviderError):
    """Request timed out; retried with backoff."""


class ChatProvider(Protocol):
    provider_id: str

    def send(self, messages: list[dict], params: GenerationParams) -> str: ...


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 0.5
    multiplier: float = 2.0
    max_delay: float = 8.0
    jitter: float = 0.25
    sleep_fn: Callable[[float], None] = time.sleep
    rng: random.Random = field(default_factory=lambda: random.Random(0))

    def delay_for(self, attempt: int) -> float:
        base = min(self.base_delay * (self.multiplier ** attempt), self.max_delay)
        return base + self.rng.uniform(0.0, self.jitter)


@dataclass
class CompletionResult:
    text: str
    attempts: int


def chat_complete(provider: ChatProvider, messages: list[dict],
                  params: GenerationParams,
                  retry: RetryPolicy | None = None) -> CompletionResult:
    """One synchronous completion.  Rate limits and timeouts back off
    exponentially with jitter up to the policy limit; auth failures are
    terminal on the first attempt."""
    retry = retry or RetryPolicy()
    last: Exception | None = None
    for attempt in range(retry.max_attempts):
        try:
            text = provider.send(messages, params)
            return CompletionResult(text=text, attempts=attempt + 1)
        except ProviderAuthError:
            raise
        except (ProviderRateLimited, ProviderTimeout) as exc:
            last = exc
            if attempt + 1 < retry.max_attempts:
                retry.sleep_fn(retry.delay_for(attempt))
    raise ProviderError(
        f"provider failed after {retry.max_attempts} attempts: {last}") from last


# -- mock provider -------------------------------------------------------------

class MockProvider:
    """Replays scripted responses in order; items may be exceptions to
    simulate transport failures."""

    def __init__(self, responses: Sequence[str | Exception], provider_id: str = "mock"):
        self._responses = list(responses)
        self._cursor = 0
        self.provider_id = provider_id
        self.requests: list[tuple[list[dict], GenerationParams]] = []

    def send(self, messages: list[dict], params: GenerationParams) -> str:
        self.requests.append((messages, params))
        if self._cursor >= len(self._responses):
            raise ProviderError("mock script exhausted")
        item = self._responses[self._cursor]
        self._cursor += 1
        if isinstance(item, Exception):
            raise item
        return item


def load_mock_script(path: str | Path) -> list[str]:
    """Mock scripts are plain text; steps are separated by a line equal to
    ``---step---``."""
    text = Path(path).read_text(encoding="utf-8")
    parts: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.strip() == MOCK_STEP_SEPARATOR:
            parts.append([])
        else:
            parts[-1].append(line)
    return ["\n".join(p).strip("\n") for p in parts]


# -- HTTP provider --------------------------------------------------------------

@dataclass
class ProviderConfig:
    endpoint: str
    model: str
    timeout: float = 60.0
    char_budget: int = 24000

    @classmethod
    def from_file(cls, path: str | Path) -> "ProviderConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        section = data.get("provider", data)
        return cls(
            endpoint=section["endpoint"],
            model=section["model"],
            timeout=float(section.get("timeout", 60.0)),
            char_budget=int(section.get("char_budget", 24000)),
        )


Transport = Callable[[str, dict, bytes, float], tuple[int, bytes]]


def _urllib_transport(url: str, headers: dict, body: bytes, timeout: float) -> tuple[int, bytes]:
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()
    except TimeoutError as exc:
        raise ProviderTimeout(str(exc)) from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, TimeoutError):
            raise ProviderTimeout(str(exc)) from exc
        raise ProviderError(str(exc)) from exc


class HttpProvider:
    """Chat-completion endpoint speaking the wire contract above."""

    def __init__(self, config: ProviderConfig,
                 transport: Transport = _urllib_transport,
                 api_key: Optional[str] = None):
        self.config = config
        self.transport = transport
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.provider_id = config.model

    def build_request(self, messages: list[dict], params: GenerationParams) -> dict:
        return {
            "model": self.config.model,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "presence_penalty": params.presence_penalty,
            "frequency_penalty": params.frequency_penalty,
            "max_tokens": params.max_tokens,
        }

    def send(self, messages: list[dict], params: GenerationParams) -> str:
        if not self.api_key:
            raise ProviderAuthError(f"no credential: set {API_KEY_ENV}")
        body = json.dumps(self.build_request(messages, params)).encode("utf-8")
        headers = {
            "Content-Type": "application/json",
            "Authorization": f"Bearer {self.api_key}",
        }
        status, payload = self.transport(self.config.endpoint, headers, body,
                                         self.config.timeout)
        if status in (401, 403):
            raise ProviderAuthError(f"authentication rejected (HTTP {status})")
        if status == 429:
            raise ProviderRateLimited("rate limited (HTTP 429)")
        if status >= 400:
            raise ProviderError(f"HTTP {status}: {payload[:200]!r}")
        data = json.loads(payload.decode("utf-8"))
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion payload: {exc}") from exc
