"""Text-completion providers: an OpenAI-compatible HTTP client and record/replay mocks."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

from .errors import (
    AuthError,
    ConfigError,
    MalformedResponseBody,
    MockMissError,
    ProviderError,
    ProviderTimeout,
    RateLimited,
)

RETRY_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class Prompt:
    system_text: str
    user_text: str
    response_schema: dict = field(default_factory=dict)

    def digest(self) -> str:
        payload = json.dumps([self.system_text, self.user_text], ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]

    def to_json(self) -> dict:
        return {
            "digest": self.digest(),
            "system_text": self.system_text,
            "user_text": self.user_text,
            "response_schema": self.response_schema,
        }


class Provider(Protocol):
    def complete(self, prompt: Prompt) -> str: ...


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 3
    backoff: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    json_mode: bool = True

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


class OpenAICompatibleProvider:
    """Chat-completions client with retry and exponential backoff.

    Retries 429/5xx responses and transport timeouts up to
    ``cfg.max_retries`` times; a numeric ``Retry-After`` header overrides
    the computed delay.
    """

    def __init__(
        self,
        cfg: ProviderConfig,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self._client = client or httpx.Client(timeout=cfg.timeout)
        self._sleep = sleep
        self.attempts = 0

    def _api_key(self) -> str:
        key = os.environ.get(self.cfg.api_key_env)
        if not key:
            raise AuthError(f"environment variable {self.cfg.api_key_env} is not set")
        return key

    def _delay(self, attempt: int, response: httpx.Response | None) -> float:
        if response is not None:
            try:
                return max(0.0, float(response.headers.get("retry-after", "")))
            except ValueError:
                pass
        return self.cfg.backoff * 2**attempt

    def complete(self, prompt: Prompt) -> str:
        headers = {"Authorization": f"Bearer {self._api_key()}", "Content-Type": "application/json"}
        body = {
            "model": self.cfg.model,
            "messages": prompt.messages(),
            "temperature": self.cfg.temperature,
        }
        if self.cfg.json_mode and prompt.response_schema:
            body["response_format"] = {"type": "json_object"}

        for attempt in range(self.cfg.max_retries + 1):
            self.attempts += 1
            last = attempt == self.cfg.max_retries
            try:
                response = self._client.post(self.cfg.endpoint, headers=headers, json=body, timeout=self.cfg.timeout)
            except httpx.TimeoutException as exc:
                if last:
                    raise ProviderTimeout(f"request timed out after {attempt + 1} attempts") from exc
                self._sleep(self._delay(attempt, None))
                continue
            except httpx.TransportError as exc:
                if last:
                    raise ProviderError(f"transport error: {exc}") from exc
                self._sleep(self._delay(attempt, None))
                continue

            status = response.status_code
            if status in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {status})")
            if status in RETRY_STATUS:
                if last:
                    if status == 429:
                        raise RateLimited(f"rate limited after {attempt + 1} attempts")
                    raise ProviderError(f"HTTP {status} after {attempt + 1} attempts")
                self._sleep(self._delay(attempt, response))
                continue
            if status >= 400:
                raise ProviderError(f"HTTP {status}: {response.text[:200]}")
            return _message_content(response)
        raise AssertionError("unreachable")


def _message_content(response: httpx.Response) -> str:
    try:
        content = response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseBody(f"unexpected response body: {response.text[:200]}") from exc
    if not isinstance(content, str):
        raise MalformedResponseBody("message content is not a string")
    return content


class MockProvider:
    """Replays responses keyed by prompt digest; unknown digests fail closed."""

    def __init__(self, responses: Mapping[str, str] | None = None):
        self.responses = dict(responses or {})
        self.calls: list[Prompt] = []

    @classmethod
    def from_dir(cls, directory: str | Path) -> MockProvider:
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"mock directory {directory} does not exist")
        return cls({p.stem: p.read_text(encoding="utf-8") for p in sorted(directory.glob("*.txt"))})

    def add(self, prompt: Prompt, response: str) -> None:
        self.responses[prompt.digest()] = response

    def complete(self, prompt: Prompt) -> str:
        self.calls.append(prompt)
        try:
            return self.responses[prompt.digest()]
        except KeyError:
            raise MockMissError(f"no recorded response for prompt {prompt.digest()[:12]}") from None


class ScriptedProvider:
    """Computes responses with a function of the prompt (deterministic test double)."""

    def __init__(self, script: Callable[[Prompt], str]):
        self.script = script
        self.calls: list[Prompt] = []

    def complete(self, prompt: Prompt) -> str:
        self.calls.append(prompt)
        return self.script(prompt)


class RecordingProvider:
    """Forwards to ``inner`` and stores each exchange as ``<digest>.txt`` for replay."""

    def __init__(self, inner: Provider, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def complete(self, prompt: Prompt) -> str:
        text = self.inner.complete(prompt)
        digest = prompt.digest()
        (self.directory / f"{digest}.txt").write_text(text, encoding="utf-8")
        (self.directory / f"{digest}.prompt.json").write_text(
            json.dumps(prompt.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        return text
