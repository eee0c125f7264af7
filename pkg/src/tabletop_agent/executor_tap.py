"""Tool-as-policy executor: the model calls robot actions as tools, one step
at a time, seeing each result before deciding the next call."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .actions import ActionDispatcher, DispatchError, SchemaError, UnknownActionError
from .llm import ChatEndpointLike, ChatMessage, ChatRequest, ToolCall, Transcript, action_tool_schemas
from .prompts import load_prompt

logger = logging.getLogger(__name__)


@dataclass
class TapConfig:
    max_tool_steps: int = 15
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_tool_steps < 1:
            raise ValueError("max_tool_steps must be at least 1")


def _run_tool_call(call: ToolCall, actions: ActionDispatcher) -> dict:
    try:
        args = json.loads(call.arguments or "{}")
    except json.JSONDecodeError as exc:
        return {"ok": False, "message": f"Error: arguments for {call.name} are not valid JSON ({exc.msg})"}
    try:
        return actions.dispatch(call.name, args)
    except UnknownActionError:
        return {"ok": False, "message": f"Error: unknown tool {call.name}"}
    except SchemaError as exc:
        return {"ok": False, "message": f"Error: invalid arguments: {exc}"}


def execute_subtask_tap(subtask: str, llm: ChatEndpointLike, actions: ActionDispatcher,
                        config: TapConfig | None = None, transcript: Transcript | None = None) -> str:
    """Resolve one subtask through a tool-call loop and return the observation."""
    if not subtask.strip():
        raise ValueError("subtask must not be empty")
    config = config or TapConfig()
    tools = action_tool_schemas()
    messages = [ChatMessage("system", load_prompt("tap_system")), ChatMessage("user", subtask)]
    if transcript is not None:
        transcript.add("executor", messages[-1])
    feedback: list[str] = []

    for _ in range(config.max_tool_steps):
        reply = llm.complete(ChatRequest(llm.model, list(messages), tools, config.temperature))
        messages.append(reply)
        if transcript is not None:
            transcript.add("executor", reply)
        if not reply.tool_calls:
            final = reply.content.strip()
            if final:
                return final
            return " ".join(feedback) or "The executor finished without calling any tools."
        for call in reply.tool_calls:
            try:
                response = _run_tool_call(call, actions)
            except DispatchError as exc:
                logger.error("dispatch failed for %s: %s", call.name, exc)
                done = " ".join(feedback)
                return f"Executor error: could not reach the robot ({exc}).{' ' + done if done else ''}"
            feedback.append(response.get("message", ""))
            tool_msg = ChatMessage("tool", json.dumps(response), tool_call_id=call.id)
            messages.append(tool_msg)
            if transcript is not None:
                transcript.add("executor", tool_msg)

    results = " ".join(feedback)
    return (
        f"Tool loop truncated after {config.max_tool_steps} steps without a final answer. "
        f"Tool results: {results or 'none'}"
    )


class TapExecutor:
    mode = "tap"

    def __init__(self, llm: ChatEndpointLike, actions: ActionDispatcher, config: TapConfig | None = None,
                 transcript: Transcript | None = None) -> None:
        self.llm = llm
        self.actions = actions
        self.config = config or TapConfig()
        self.transcript = transcript

    def execute_subtask(self, subtask: str) -> str:
        return execute_subtask_tap(subtask, self.llm, self.actions, self.config, self.transcript)
