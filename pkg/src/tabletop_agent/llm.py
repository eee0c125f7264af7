"""Chat-completion client: a remote endpoint speaking the common JSON chat
format, and a scripted mock for tests."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Protocol, Sequence

import httpx

from .actions import ACTION_SPECS, parameters_schema
from .world import ACTIONS

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", "tool")


@dataclass(frozen=True)
class ToolCall:
    id: str
    name: str
    arguments: str = "{}"  # raw JSON text as produced by the model

    def to_wire(self) -> dict[str, Any]:
        return {"id": self.id, "type": "function", "function": {"name": self.name, "arguments": self.arguments}}

    @classmethod
    def from_wire(cls, payload: Mapping[str, Any]) -> ToolCall:
        fn = payload.get("function", payload)
        arguments = fn.get("arguments", "{}")
        if not isinstance(arguments, str):
            arguments = json.dumps(arguments)
        return cls(id=str(payload.get("id", "")), name=str(fn["name"]), arguments=arguments)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if (self.tool_call_id is not None) != (self.role == "tool"):
            raise ValueError("tool_call_id is required on tool messages and only there")
        if self.tool_calls and self.role != "assistant":
            raise ValueError("only assistant messages carry tool calls")
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))

    def to_wire(self) -> dict[str, Any]:
        out: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            out["tool_calls"] = [c.to_wire() for c in self.tool_calls]
        if self.tool_call_id is not None:
            out["tool_call_id"] = self.tool_call_id
        return out

    @classmethod
    def from_wire(cls, payload: Mapping[str, Any]) -> ChatMessage:
        calls = tuple(ToolCall.from_wire(c) for c in payload.get("tool_calls") or ())
        return cls(
            role=payload.get("role", "assistant"),
            content=payload.get("content") or "",
            tool_calls=calls,
            tool_call_id=payload.get("tool_call_id"),
        )


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: dict[str, Any]

    def to_wire(self) -> dict[str, Any]:
        return {
            "type": "function",
            "function": {"name": self.name, "description": self.description, "parameters": self.parameters},
        }


def action_tool_schemas() -> list[ToolSchema]:
    """One tool schema per robot action, in declaration order."""
    return [
        ToolSchema(name, f"{ACTION_SPECS[name][0]} Returns: {ACTION_SPECS[name][1]}", parameters_schema(name))
        for name in ACTIONS
    ]


@dataclass
class ChatRequest:
    model: str
    messages: list[ChatMessage]
    tools: list[ToolSchema] | None = None
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.messages[0].role != "system":
            raise ValueError("the first message must be the system prompt")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    def to_wire(self) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [m.to_wire() for m in self.messages],
            "temperature": self.temperature,
        }
        if self.tools:
            body["tools"] = [t.to_wire() for t in self.tools]
        return body


class LLMError(RuntimeError):
    def __init__(self, message: str, attempts: int = 1) -> None:
        super().__init__(message)
        self.attempts = attempts


class TransportError(LLMError):
    pass


class StatusError(LLMError):
    def __init__(self, message: str, status: int, attempts: int = 1) -> None:
        super().__init__(message, attempts)
        self.status = status


class ResponseFormatError(LLMError):
    pass


class ScriptExhausted(LLMError):
    pass


class ChatEndpointLike(Protocol):
    model: str

    def complete(self, request: ChatRequest) -> ChatMessage: ...


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    retries: int = 2
    backoff: float = 1.0


class ChatEndpoint:
    """Remote chat-completion endpoint (``POST {base_url}/chat/completions``)."""

    def __init__(self, config: EndpointConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self.model = config.model
        self.client = client or httpx.Client(timeout=config.timeout)
        self.durations: list[float] = []
        self._lock = threading.Lock()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env) if self.config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _attempt(self, body: dict[str, Any]) -> ChatMessage:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self.client.post(url, json=body, headers=self._headers())
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {url} failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise StatusError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
        try:
            return ChatMessage.from_wire(resp.json()["choices"][0]["message"])
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ResponseFormatError(f"unparseable completion body: {exc}") from exc

    def complete(self, request: ChatRequest) -> ChatMessage:
        body = request.to_wire()
        started = time.perf_counter()
        try:
            for attempt in range(self.config.retries + 1):
                try:
                    return self._attempt(body)
                except LLMError as exc:
                    retryable = not isinstance(exc, StatusError) or exc.status == 429 or exc.status >= 500
                    exc.attempts = attempt + 1
                    if not retryable or attempt == self.config.retries:
                        raise
                    logger.warning("model call failed (attempt %d): %s", attempt + 1, exc)
                    time.sleep(self.config.backoff * 2**attempt)
            raise AssertionError("unreachable")
        finally:
            with self._lock:
                self.durations.append(time.perf_counter() - started)

    def close(self) -> None:
        self.client.close()


def _as_message(item: ChatMessage | str | Mapping[str, Any]) -> ChatMessage:
    if isinstance(item, ChatMessage):
        return item
    if isinstance(item, str):
        return ChatMessage("assistant", item)
    return ChatMessage.from_wire({"role": "assistant", **item})


class MockEndpoint:
    """Replays canned assistant messages in order; records every request."""

    def __init__(self, script: Iterable[ChatMessage | str | Mapping[str, Any]], model: str = "mock") -> None:
        self.script = [_as_message(m) for m in script]
        self.model = model
        self.requests: list[ChatRequest] = []
        self.durations: list[float] = []
        self._next = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return len(self.script) - self._next

    def complete(self, request: ChatRequest) -> ChatMessage:
        started = time.perf_counter()
        with self._lock:
            self.requests.append(request)
            if self._next >= len(self.script):
                raise ScriptExhausted(f"mock script exhausted after {len(self.script)} replies")
            reply = self.script[self._next]
            self._next += 1
            self.durations.append(time.perf_counter() - started)
        return reply


def mock_provider(script: Sequence[ChatMessage | str | Mapping[str, Any]], model: str = "mock") -> MockEndpoint:
    if not script:
        raise ValueError("a mock script needs at least one message")
    return MockEndpoint(script, model)


def mock_roles(**scripts: Sequence[ChatMessage | str | Mapping[str, Any]]) -> dict[str, MockEndpoint]:
    """Role-keyed mocks, e.g. ``mock_roles(planner=[...], executor=[...])``."""
    return {role: mock_provider(script, model=f"mock-{role}") for role, script in scripts.items()}


class Metered:
    """Wraps an endpoint and records the wall-clock duration of each call made through it."""

    def __init__(self, inner: ChatEndpointLike) -> None:
        self.inner = inner
        self.model = inner.model
        self.durations: list[float] = []

    def complete(self, request: ChatRequest) -> ChatMessage:
        started = time.perf_counter()
        try:
            return self.inner.complete(request)
        finally:
            self.durations.append(time.perf_counter() - started)

    @property
    def total(self) -> float:
        return sum(self.durations)


def complete(endpoint: ChatEndpointLike, request: ChatRequest) -> ChatMessage:
    return endpoint.complete(request)


def tool_call(name: str, arguments: Mapping[str, Any] | str, call_id: str | None = None) -> ToolCall:
    """Build a tool call (handy for mock scripts)."""
    text = arguments if isinstance(arguments, str) else json.dumps(dict(arguments))
    return ToolCall(call_id or f"call_{name}", name, text)


@dataclass
class Transcript:
    """Flat, serializable record of every message exchanged in a run."""

    entries: list[dict[str, Any]] = field(default_factory=list)

    def add(self, agent: str, message: ChatMessage) -> None:
        self.entries.append({"agent": agent, **message.to_wire()})

    def dumps(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True, ensure_ascii=False) for e in self.entries)
