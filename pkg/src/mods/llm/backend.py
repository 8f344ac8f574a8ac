"""Chat-completion backends.

``ScriptedBackend`` answers from a JSON script for offline runs and tests;
``LiveBackend`` talks to an OpenAI-style ``/chat/completions`` endpoint.
Both are stateless: usage is recorded in a caller-owned :class:`UsageLedger`
through :func:`complete`.
"""

from __future__ import annotations

import json
import logging
import os
import time
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .ledger import UsageLedger

logger = logging.getLogger(__name__)

ROLES = ("system", "user")


class BackendError(RuntimeError):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")
        self.attempts = attempts


class ConfigurationError(RuntimeError):
    pass


class ScriptMissError(BackendError):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unsupported role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``shape`` names the structured payload the caller expects back and
    ``key`` is a ``;``-separated list of ``name=value`` labels (stage, topic,
    document, ...) that scripted backends match on. Live backends ignore both.
    """

    messages: tuple[Message, ...]
    temperature: float = 0.0
    shape: str | None = None
    key: str = ""

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("a request needs at least one user message")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")

    @classmethod
    def from_prompt(cls, prompt: str, system: str | None = None, **kwargs) -> ChatRequest:
        msgs = [Message("system", system)] if system else []
        msgs.append(Message("user", prompt))
        return cls(messages=tuple(msgs), **kwargs)

    def with_message(self, content: str) -> ChatRequest:
        return ChatRequest(self.messages + (Message("user", content),), self.temperature, self.shape, self.key)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be nonnegative")


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def prompt_tokens(messages: Sequence[Message]) -> int:
    return sum(whitespace_tokens(m.content) for m in messages)


class ModelBackend(ABC):
    @abstractmethod
    def send(self, request: ChatRequest) -> ChatResponse:
        """Perform one completion. Must be safe to call from several threads."""


def complete(backend: ModelBackend, request: ChatRequest, stage: str,
             ledger: UsageLedger | None = None) -> ChatResponse:
    response = backend.send(request)
    if ledger is not None:
        ledger.record(stage, response.input_tokens, response.output_tokens)
    return response


def _key_parts(key: str) -> frozenset[str]:
    return frozenset(p.strip() for p in key.split(";") if p.strip())


@dataclass
class ScriptedBackend(ModelBackend):
    """Deterministic backend driven by ``{shape: {match_key: response_text}}``.

    A script key matches when all of its ``;``-separated labels occur in the
    request key; the most specific match wins (ties go to the
    lexicographically smallest key). ``"*"`` is the per-shape fallback, then
    ``defaults[shape]``. Requests without a shape use the ``"text"`` table.
    Token counts are whitespace counts, an approximation of real usage.
    """

    script: Mapping[str, Mapping[str, str]]
    defaults: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> ScriptedBackend:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigurationError(f"{path}: script must map shape -> {{match_key: response}}")
        return cls(script=data)

    def lookup(self, request: ChatRequest) -> str:
        shape = request.shape or "text"
        table = self.script.get(shape, {})
        parts = _key_parts(request.key)
        best: tuple[int, str] | None = None
        for k in table:
            if k == "*":
                continue
            need = _key_parts(k)
            if need <= parts and (best is None or (-len(need), k) < (-best[0], best[1])):
                best = (len(need), k)
        if best is not None:
            return table[best[1]]
        if "*" in table:
            return table["*"]
        if shape in self.defaults:
            return self.defaults[shape]
        raise ScriptMissError(f"no scripted response for shape {shape!r} key {request.key!r}")

    def send(self, request: ChatRequest) -> ChatResponse:
        text = self.lookup(request)
        return ChatResponse(text, prompt_tokens(request.messages), whitespace_tokens(text))


ENV_BASE = "MODS_API_BASE"
ENV_KEY = "MODS_API_KEY"
ENV_MODEL = "MODS_MODEL"


class LiveBackend(ModelBackend):
    """Client for a chat-completion HTTP endpoint.

    The request body is ``{"model", "messages": [{"role", "content"}],
    "temperature"}`` posted to ``<base>/chat/completions`` with a bearer token.
    Transport errors and 429/5xx responses are retried with exponential
    backoff.
    """

    def __init__(self, api_base: str, api_key: str, model: str, *, max_attempts: int = 3,
                 timeout: float = 120.0, backoff: float = 1.0, transport: httpx.BaseTransport | None = None):
        if not api_key:
            raise ConfigurationError(f"missing credential: set {ENV_KEY}")
        self.url = api_base.rstrip("/") + "/chat/completions"
        self.model = model
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._client = httpx.Client(timeout=timeout, transport=transport,
                                    headers={"Authorization": f"Bearer {api_key}"})

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **kwargs) -> LiveBackend:
        env = os.environ if env is None else env
        key = env.get(ENV_KEY)
        if not key:
            raise ConfigurationError(f"missing credential: set {ENV_KEY}")
        return cls(env.get(ENV_BASE, "https://api.openai.com/v1"), key,
                   env.get(ENV_MODEL, "gpt-4-1106-preview"), **kwargs)

    def body(self, request: ChatRequest) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }

    def send(self, request: ChatRequest) -> ChatResponse:
        last = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._client.post(self.url, json=self.body(request))
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise ConfigurationError(f"endpoint rejected credential (HTTP {resp.status_code})")
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}", attempt)
                else:
                    return self._parse(resp.json(), request)
            logger.warning("chat completion attempt %d failed: %s", attempt, last)
            if attempt < self.max_attempts and self.backoff > 0:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        raise BackendError(last, self.max_attempts)

    @staticmethod
    def _parse(payload: dict, request: ChatRequest) -> ChatResponse:
        try:
            text = payload["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise BackendError("malformed completion payload") from None
        usage = payload.get("usage") or {}
        tin = usage.get("prompt_tokens")
        tout = usage.get("completion_tokens")
        if tin is None:
            tin = prompt_tokens(request.messages)
        if tout is None:
            tout = whitespace_tokens(text)
        return ChatResponse(text, int(tin), int(tout))

    def close(self) -> None:
        self._client.close()


def backend_from_spec(spec: str, env: Mapping[str, str] | None = None) -> ModelBackend:
    """Parse a CLI backend choice: ``scripted:<path>`` or ``live``."""
    if spec == "live":
        return LiveBackend.from_env(env)
    if spec.startswith("scripted:"):
        return ScriptedBackend.from_file(spec.split(":", 1)[1])
    raise ConfigurationError(f"unknown backend {spec!r}; use 'scripted:<path>' or 'live'")
