"""Code-as-policy executor: the model writes an action script for the whole
subtask, which is parsed and run once."""

from __future__ import annotations

import re

from .actions import ACTION_SPECS, ActionDispatcher
from .llm import ChatEndpointLike, ChatMessage, ChatRequest, Transcript
from .prompts import load_prompt
from .script import ExecutionLog, ParseError, parse_script, run_script
from .world import ACTION_PARAMS, ACTIONS

_FENCE = re.compile(r"```[^\n`]*\n(.*?)(?:```|\Z)", re.DOTALL)
_INLINE_FENCE = re.compile(r"```(.*?)```", re.DOTALL)


class ExecutorError(RuntimeError):
    pass


def action_reference() -> str:
    """Signature, description and return value of every action, for the prompt."""
    blocks = []
    for name in ACTIONS:
        description, returns, props = ACTION_SPECS[name]
        params = ", ".join(f"{p}: {'pose' if p == 'pose' else 'string'}" for p in ACTION_PARAMS[name])
        lines = [f"{name}({params})", f"    {description}"]
        for p, schema in props.items():
            lines.append(f"    {p}: {schema.get('description', '')}")
        lines.append(f"    Returns: {returns}")
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def extract_script(reply: str) -> str:
    """First fenced code block of the reply, or the whole reply when unfenced."""
    m = _FENCE.search(reply)
    if m:
        return m.group(1)
    m = _INLINE_FENCE.search(reply)
    if m:
        return m.group(1)
    return reply


def generate_script(subtask: str, llm: ChatEndpointLike, temperature: float = 0.0,
                    transcript: Transcript | None = None) -> str:
    if not subtask.strip():
        raise ValueError("subtask must not be empty")
    system = load_prompt("cap_system", actions=action_reference())
    user = ChatMessage("user", f"Subtask: {subtask}")
    reply = llm.complete(ChatRequest(llm.model, [ChatMessage("system", system), user], None, temperature))
    if transcript is not None:
        transcript.add("executor", user)
        transcript.add("executor", reply)
    if not reply.content.strip():
        raise ExecutorError("the model returned an empty reply")
    return extract_script(reply.content)


def observation_from_log(log: ExecutionLog) -> str:
    lines = []
    step = 0
    for entry in log.entries:
        if entry.ok:
            step += 1
            lines.append(f"{step}. {entry.describe()}")
    if log.halted_at is not None:
        failed = log.entries[-1].describe() if log.entries else log.halt_reason
        lines.append(f"Execution halted at statement {log.halted_at + 1}: {failed}")
    elif not lines:
        lines.append("Script completed with no actions.")
    else:
        lines.append("Script completed successfully.")
    return "\n".join(lines)


def format_parse_error(err: ParseError) -> str:
    return f"Script parse error at line {err.line}, column {err.column}: {err.message} (near {err.token!r})"


def execute_subtask_cap(subtask: str, llm: ChatEndpointLike, actions: ActionDispatcher,
                        temperature: float = 0.0, transcript: Transcript | None = None) -> str:
    """Generate, parse and run a script; every outcome is reported as text."""
    try:
        source = generate_script(subtask, llm, temperature, transcript)
    except ExecutorError as exc:
        return f"Executor error: {exc}"
    try:
        script = parse_script(source)
    except ParseError as err:
        return format_parse_error(err)
    return observation_from_log(run_script(script, actions))


class CapExecutor:
    mode = "cap"

    def __init__(self, llm: ChatEndpointLike, actions: ActionDispatcher, temperature: float = 0.0,
                 transcript: Transcript | None = None) -> None:
        self.llm = llm
        self.actions = actions
        self.temperature = temperature
        self.transcript = transcript

    def execute_subtask(self, subtask: str) -> str:
        return execute_subtask_cap(subtask, self.llm, self.actions, self.temperature, self.transcript)
