"""Language-model backends behind a single chat-completion protocol.

The HTTP backend speaks the common chat-completions wire shape; the
scripted backend replays canned responses deterministically for tests,
demos, and offline runs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx


class BackendError(Exception):
    """One attempt against the backend failed (transport, HTTP, or schema)."""


@dataclass(frozen=True)
class BackendResponse:
    text: str
    output_tokens: int | None = None
    prompt_tokens: int | None = None


class LLMBackend(Protocol):
    def complete(self, messages: Sequence[dict], temperature: float = 0.0) -> BackendResponse:
        """messages are {role, content} dicts ordered system-first."""
        ...


class HttpChatBackend:
    """POSTs {model, messages, temperature} to <base_url>/chat/completions.

    Accepts either the standard schema (choices[0].message.content plus
    usage.completion_tokens) or a minimal {text, usage.output_tokens} shape.
    The API key, when configured, is read from the named environment
    variable at call time and sent as a bearer token.
    """

    def __init__(self, base_url: str, model: str, api_key_env: str | None = None,
                 timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def complete(self, messages: Sequence[dict], temperature: float = 0.0) -> BackendResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise BackendError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.model, "messages": list(messages), "temperature": temperature}
        try:
            resp = httpx.post(f"{self.base_url}/chat/completions", json=body,
                              headers=headers, timeout=self.timeout_s)
        except httpx.HTTPError as exc:
            raise BackendError(f"transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
        except ValueError as exc:
            raise BackendError("response body is not JSON") from exc
        return _parse_response(data)


def _parse_response(data: dict) -> BackendResponse:
    usage = data.get("usage") or {}
    out_tokens = usage.get("completion_tokens", usage.get("output_tokens"))
    prompt_tokens = usage.get("prompt_tokens")
    choices = data.get("choices")
    if choices:
        message = choices[0].get("message") or {}
        text = message.get("content")
        if text is None:
            text = choices[0].get("text")
    else:
        text = data.get("text")
    if not isinstance(text, str):
        raise BackendError("response carries no generated text")
    return BackendResponse(
        text=text,
        output_tokens=int(out_tokens) if out_tokens is not None else None,
        prompt_tokens=int(prompt_tokens) if prompt_tokens is not None else None,
    )


class ScriptedBackend:
    """Replays a fixed sequence of responses; exceptions in the script are
    raised in place of a reply to exercise retry paths."""

    def __init__(self, script: Sequence[str | Exception | BackendResponse]):
        self.script = list(script)
        self.calls: list[Sequence[dict]] = []
        self._cursor = 0

    def complete(self, messages: Sequence[dict], temperature: float = 0.0) -> BackendResponse:
        self.calls.append(list(messages))
        if self._cursor >= len(self.script):
            raise BackendError("scripted backend ran out of responses")
        item = self.script[self._cursor]
        self._cursor += 1
        if isinstance(item, Exception):
            raise item
        if isinstance(item, BackendResponse):
            return item
        return BackendResponse(text=item)
